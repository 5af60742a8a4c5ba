#pragma once

// Soft-margin RBF support vector machines: SMO binary training, Platt
// calibration, one-vs-one multi-class models and grid-search CV.

#include "leafdx/lesion_features.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace leafdx::svm {

using features::FeatureVector;

struct LabeledDataset {
    std::vector<FeatureVector> vectors;
    std::vector<int> labels;  // in [0, class_count())
    std::vector<std::string> class_names;

    int class_count() const { return static_cast<int>(class_names.size()); }
    std::vector<std::size_t> class_sizes() const;
    /// Throws unless N >= K >= 2, every class has >= min_per_class samples
    /// and all vectors share one dimension.
    void validate(std::size_t min_per_class = 2) const;
};

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

struct SmoOptions {
    double tol = 1e-3;
    std::int64_t max_iterations = 1'000'000;
    std::size_t cache_bytes = std::size_t{64} << 20;
};

struct BinarySvm {
    std::vector<FeatureVector> support_vectors;
    std::vector<double> dual_coefs;  // alpha_i * y_i
    double bias = 0.0;
    double gamma = 1.0;
    double C = 1.0;

    /// f(x) = sum_i coef_i K(sv_i, x) + bias; positive means the +1 class.
    double decision(std::span<const double> x) const;
};

struct SmoResult {
    BinarySvm machine;
    std::vector<double> alpha;  // one per training point
    std::int64_t iterations = 0;
    double max_violation = 0.0;  // m(alpha) - M(alpha) at termination
};

/// y holds +1 / -1. Throws SingleClass or TrainingStalled.
SmoResult smo_train(std::span<const FeatureVector> x, std::span<const int> y, double C,
                    double gamma, const SmoOptions& opts = {});

struct PlattParams {
    double A = 0.0;
    double B = 0.0;

    /// P(y = +1 | f) = 1 / (1 + exp(A f + B)).
    double probability(double f) const;
};

PlattParams platt_fit(std::span<const double> decision_values, std::span<const int> labels);

struct PairMachine {
    int positive = 0;  // class whose samples are +1
    int negative = 1;
    BinarySvm svm;
    PlattParams platt;
};

struct SvmModel {
    std::vector<std::string> class_names;
    std::vector<PairMachine> machines;  // (0,1), (0,2), ..., (K-2,K-1)
    features::ScalingParams scaling;
    int layout_version = features::kLayoutVersion;
    double C = 1.0;
    double gamma = 1.0;

    int class_count() const { return static_cast<int>(class_names.size()); }
    std::size_t dimension() const { return scaling.size(); }
};

struct TrainOptions {
    SmoOptions smo;
    int platt_folds = 5;
    std::uint64_t seed = 42;
};

/// Trains on already scaled vectors; `scaling` is stored in the model so
/// unscaled queries can be mapped the same way.
SvmModel train_multiclass(const LabeledDataset& data, double C, double gamma,
                          features::ScalingParams scaling, const TrainOptions& opts = {});

/// Fits the scaling on `raw`, scales it and trains.
SvmModel train_scaled(const LabeledDataset& raw, double C, double gamma,
                      const TrainOptions& opts = {});

/// Class probabilities from pairwise coupling of the Platt estimates.
/// Query vector in raw (unscaled) feature units.
std::vector<double> predict_proba(const SvmModel& model, std::span<const double> v);
/// Query vector already in scaled units.
std::vector<double> predict_proba_scaled(const SvmModel& model, std::span<const double> v);
/// One-vs-one majority vote on a scaled vector; ties go to the lower class id.
int predict_vote_scaled(const SvmModel& model, std::span<const double> v);

struct GridPoint {
    double C = 0.0;
    double gamma = 0.0;
    double mean_accuracy = 0.0;
    bool stalled = false;
};

struct CvReport {
    std::vector<GridPoint> grid;
    double best_C = 0.0;
    double best_gamma = 0.0;
    double best_accuracy = 0.0;
    int folds = 0;
    std::uint64_t seed = 42;
};

struct GridSpec {
    std::vector<double> C;
    std::vector<double> gamma;

    /// C in 2^-5, 2^-3, ..., 2^15 and gamma in 2^-15, 2^-13, ..., 2^3.
    static GridSpec standard();
};

/// Fold index per sample: each class is shuffled (Fisher-Yates on
/// mt19937_64) and dealt round-robin across the k folds.
std::vector<int> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed);

/// Mean one-vs-one vote accuracy over the folds for each grid point.
/// Vectors are used as given (scale them first).
CvReport grid_search_cv(const LabeledDataset& data, const GridSpec& grid, int k = 5,
                        std::uint64_t seed = 42, const SmoOptions& smo = {});

}  // namespace leafdx::svm
