//! Classifier for close-matching printed glyphs.
//!
//! A binarized, size-normalized glyph is reduced to its row and column ink
//! counts (projection histograms). Each histogram is transformed with a
//! discrete Fourier transform and the magnitudes of the lowest `m`
//! coefficients per axis form the feature vector. Pairs of confusable classes
//! are separated by RBF-kernel SVMs trained with SMO, and results are scored
//! as per-pair sensitivity, specificity and accuracy.
//!
//! | module | role |
//! |---|---|
//! | [`imaging`] | PGM I/O, Otsu / fixed thresholding, crop, resize |
//! | [`features`] | projections, DFT, truncated magnitude features |
//! | [`svm`] | RBF kernel, SMO, one-vs-one voting, model files |
//! | [`dataset`] | manifests, pair registry, even split, synthetic corpora |
//! | [`eval`] | confusion counts, metrics, report table |
//! | [`cli`] | the `closematch` command line |

pub mod cli;
pub mod dataset;
pub mod eval;
pub mod features;
pub mod imaging;
pub mod svm;
