#include "leafdx/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <memory>
#include <random>

namespace leafdx::svm {

std::vector<std::size_t> LabeledDataset::class_sizes() const {
    std::vector<std::size_t> n(class_names.size(), 0);
    for (int l : labels)
        if (l >= 0 && l < class_count()) ++n[l];
    return n;
}

void LabeledDataset::validate(std::size_t min_per_class) const {
    if (vectors.size() != labels.size())
        throw Error(ErrorCode::DimensionMismatch, "dataset: vector and label counts differ");
    if (class_count() < 2) throw Error(ErrorCode::SingleClass, "dataset needs at least two classes");
    if (vectors.size() < class_names.size())
        throw Error(ErrorCode::TooFewSamples, "dataset has fewer samples than classes");
    for (int l : labels)
        if (l < 0 || l >= class_count())
            throw Error(ErrorCode::InvalidArgument, "dataset label out of range");
    const auto sizes = class_sizes();
    for (std::size_t c = 0; c < sizes.size(); ++c)
        if (sizes[c] < min_per_class)
            throw Error(ErrorCode::TooFewSamples,
                        "class '" + class_names[c] + "' has too few samples");
    for (const auto& v : vectors)
        if (v.size() != vectors.front().size())
            throw Error(ErrorCode::DimensionMismatch, "dataset vectors differ in length");
}

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
    if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "rbf_kernel: dimension mismatch");
    double d2 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        d2 += d * d;
    }
    return std::exp(-gamma * d2);
}

double BinarySvm::decision(std::span<const double> x) const {
    double f = bias;
    for (std::size_t i = 0; i < support_vectors.size(); ++i)
        f += dual_coefs[i] * rbf_kernel(support_vectors[i], x, gamma);
    return f;
}

double PlattParams::probability(double f) const {
    const double z = A * f + B;
    // Written so neither branch overflows.
    return z >= 0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
}

namespace {

// Kernel rows over a working subset, indexed 0..n-1.
class RowSource {
public:
    virtual ~RowSource() = default;
    virtual std::size_t size() const = 0;
    virtual void fill(std::size_t i, double* out) const = 0;
};

class ComputedRows final : public RowSource {
public:
    ComputedRows(std::span<const FeatureVector> x, std::vector<std::size_t> idx, double gamma)
        : x_(x), idx_(std::move(idx)), gamma_(gamma) {}
    std::size_t size() const override { return idx_.size(); }
    void fill(std::size_t i, double* out) const override {
        const auto& xi = x_[idx_[i]];
        for (std::size_t t = 0; t < idx_.size(); ++t) out[t] = rbf_kernel(xi, x_[idx_[t]], gamma_);
    }

private:
    std::span<const FeatureVector> x_;
    std::vector<std::size_t> idx_;
    double gamma_;
};

// Gram matrix over a full sample set, cut to a subset on demand.
struct Gram {
    std::size_t n = 0;
    std::vector<double> k;

    Gram(std::span<const FeatureVector> x, double gamma) : n(x.size()), k(n * n) {
        for (std::size_t i = 0; i < n; ++i) {
            k[i * n + i] = 1.0;
            for (std::size_t j = i + 1; j < n; ++j)
                k[i * n + j] = k[j * n + i] = rbf_kernel(x[i], x[j], gamma);
        }
    }
    double operator()(std::size_t a, std::size_t b) const { return k[a * n + b]; }
};

class GramRows final : public RowSource {
public:
    GramRows(const Gram& g, std::vector<std::size_t> idx) : g_(g), idx_(std::move(idx)) {}
    std::size_t size() const override { return idx_.size(); }
    void fill(std::size_t i, double* out) const override {
        const double* row = &g_.k[idx_[i] * g_.n];
        for (std::size_t t = 0; t < idx_.size(); ++t) out[t] = row[idx_[t]];
    }

private:
    const Gram& g_;
    std::vector<std::size_t> idx_;
};

// LRU cache of kernel rows bounded by a byte budget (at least two rows so the
// working pair is always resident).
class KernelCache {
public:
    KernelCache(const RowSource& src, std::size_t budget) : src_(src), n_(src.size()) {
        const std::size_t row_bytes = std::max<std::size_t>(1, n_ * sizeof(double));
        capacity_ = std::max<std::size_t>(2, budget / row_bytes);
        slot_.assign(n_, lru_.end());
    }

    const double* row(std::size_t i) {
        if (slot_[i] != lru_.end()) {
            lru_.splice(lru_.begin(), lru_, slot_[i]);
            return lru_.front().values.data();
        }
        if (lru_.size() >= capacity_) {
            Entry& victim = lru_.back();
            slot_[victim.index] = lru_.end();
            Entry reuse{i, std::move(victim.values)};
            lru_.pop_back();
            lru_.push_front(std::move(reuse));
        } else {
            lru_.push_front({i, std::vector<double>(n_)});
        }
        slot_[i] = lru_.begin();
        src_.fill(i, lru_.front().values.data());
        return lru_.front().values.data();
    }

private:
    struct Entry {
        std::size_t index;
        std::vector<double> values;
    };
    const RowSource& src_;
    std::size_t n_;
    std::size_t capacity_ = 2;
    std::list<Entry> lru_;
    std::vector<std::list<Entry>::iterator> slot_;
};

struct DualSolution {
    std::vector<double> alpha;
    double bias = 0.0;
    std::int64_t iterations = 0;
    double violation = 0.0;
};

DualSolution solve_dual(std::span<const int> y, double C, const RowSource& src,
                        const SmoOptions& opts) {
    const std::size_t n = y.size();
    if (!(C > 0)) throw Error(ErrorCode::InvalidArgument, "C must be > 0");
    bool pos = false, neg = false;
    for (int v : y) {
        if (v != 1 && v != -1) throw Error(ErrorCode::InvalidArgument, "binary labels must be +1/-1");
        (v > 0 ? pos : neg) = true;
    }
    if (!pos || !neg) throw Error(ErrorCode::SingleClass, "binary training needs both classes");

    KernelCache cache(src, opts.cache_bytes);
    DualSolution sol;
    std::vector<double>& a = sol.alpha;
    a.assign(n, 0.0);
    std::vector<double> G(n, -1.0);  // gradient of 1/2 a'Qa - e'a

    auto in_up = [&](std::size_t t) { return y[t] > 0 ? a[t] < C : a[t] > 0; };
    auto in_low = [&](std::size_t t) { return y[t] > 0 ? a[t] > 0 : a[t] < C; };

    double m = 0, M = 0;
    for (;;) {
        std::size_t i = n, j = n;
        m = -std::numeric_limits<double>::infinity();
        M = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < n; ++t) {
            const double v = -y[t] * G[t];
            if (in_up(t) && v > m) {
                m = v;
                i = t;
            }
            if (in_low(t) && v < M) {
                M = v;
                j = t;
            }
        }
        if (i == n || j == n || m - M < opts.tol) break;
        if (sol.iterations >= opts.max_iterations)
            throw Error(ErrorCode::TrainingStalled, "training stalled");
        ++sol.iterations;

        const double* Ki = cache.row(i);
        const double* Kj = cache.row(j);
        double eta = Ki[i] + Kj[j] - 2.0 * Ki[j];
        if (eta <= 0) eta = 1e-12;
        const double ai = a[i], aj = a[j];
        if (y[i] != y[j]) {
            const double delta = (-G[i] - G[j]) / eta;
            const double diff = ai - aj;
            a[i] += delta;
            a[j] += delta;
            if (diff > 0) {
                if (a[j] < 0) {
                    a[j] = 0;
                    a[i] = diff;
                }
            } else if (a[i] < 0) {
                a[i] = 0;
                a[j] = -diff;
            }
            if (diff > 0) {
                if (a[i] > C) {
                    a[i] = C;
                    a[j] = C - diff;
                }
            } else if (a[j] > C) {
                a[j] = C;
                a[i] = C + diff;
            }
        } else {
            const double delta = (G[i] - G[j]) / eta;
            const double sum = ai + aj;
            a[i] -= delta;
            a[j] += delta;
            if (sum > C) {
                if (a[i] > C) {
                    a[i] = C;
                    a[j] = sum - C;
                }
            } else if (a[j] < 0) {
                a[j] = 0;
                a[i] = sum;
            }
            if (sum > C) {
                if (a[j] > C) {
                    a[j] = C;
                    a[i] = sum - C;
                }
            } else if (a[i] < 0) {
                a[i] = 0;
                a[j] = sum;
            }
        }
        const double di = (a[i] - ai) * y[i], dj = (a[j] - aj) * y[j];
        for (std::size_t t = 0; t < n; ++t) G[t] += y[t] * (Ki[t] * di + Kj[t] * dj);
    }
    sol.violation = std::max(0.0, m - M);

    double free_sum = 0;
    std::size_t free_count = 0;
    for (std::size_t t = 0; t < n; ++t)
        if (a[t] > 0 && a[t] < C) {
            free_sum += -y[t] * G[t];
            ++free_count;
        }
    sol.bias = free_count ? free_sum / static_cast<double>(free_count) : 0.5 * (m + M);
    return sol;
}

BinarySvm make_machine(std::span<const FeatureVector> x, std::span<const std::size_t> idx,
                       std::span<const int> y, const DualSolution& sol, double C, double gamma) {
    BinarySvm svm;
    svm.bias = sol.bias;
    svm.C = C;
    svm.gamma = gamma;
    for (std::size_t t = 0; t < idx.size(); ++t)
        if (sol.alpha[t] > 0) {
            svm.support_vectors.push_back(x[idx[t]]);
            svm.dual_coefs.push_back(sol.alpha[t] * y[t]);
        }
    return svm;
}

double gram_decision(const Gram& g, std::span<const std::size_t> train_idx, std::span<const int> y,
                     const DualSolution& sol, std::size_t query) {
    double f = sol.bias;
    for (std::size_t t = 0; t < train_idx.size(); ++t)
        if (sol.alpha[t] > 0) f += sol.alpha[t] * y[t] * g(train_idx[t], query);
    return f;
}

struct PairSubset {
    std::vector<std::size_t> idx;  // into the dataset
    std::vector<int> y;
};

PairSubset pair_subset(std::span<const int> labels, std::span<const std::size_t> pool, int pos,
                       int neg) {
    PairSubset s;
    for (std::size_t i : pool) {
        if (labels[i] == pos) {
            s.idx.push_back(i);
            s.y.push_back(1);
        } else if (labels[i] == neg) {
            s.idx.push_back(i);
            s.y.push_back(-1);
        }
    }
    return s;
}

// Row source for a subset: precomputed gram when available, else on the fly.
std::unique_ptr<RowSource> rows_for(const Gram* g, std::span<const FeatureVector> x,
                                    std::vector<std::size_t> idx, double gamma) {
    if (g) return std::make_unique<GramRows>(*g, std::move(idx));
    return std::make_unique<ComputedRows>(x, std::move(idx), gamma);
}

double subset_decision(const Gram* g, std::span<const FeatureVector> x, double gamma,
                       std::span<const std::size_t> train_idx, std::span<const int> y,
                       const DualSolution& sol, std::size_t query) {
    if (g) return gram_decision(*g, train_idx, y, sol, query);
    double f = sol.bias;
    for (std::size_t t = 0; t < train_idx.size(); ++t)
        if (sol.alpha[t] > 0) f += sol.alpha[t] * y[t] * rbf_kernel(x[train_idx[t]], x[query], gamma);
    return f;
}

bool gram_fits(std::size_t n, std::size_t budget) {
    return n > 0 && n <= budget / sizeof(double) / n;
}

std::uint64_t fisher_yates_draw(std::mt19937_64& rng, std::uint64_t bound) {
    // Rejection sampling for an unbiased value in [0, bound).
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do r = rng();
    while (r >= limit);
    return r % bound;
}

}  // namespace

SmoResult smo_train(std::span<const FeatureVector> x, std::span<const int> y, double C, double gamma,
                    const SmoOptions& opts) {
    if (x.size() != y.size()) throw Error(ErrorCode::DimensionMismatch, "smo_train: size mismatch");
    if (!(gamma > 0)) throw Error(ErrorCode::InvalidArgument, "gamma must be > 0");
    std::vector<std::size_t> idx(x.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    ComputedRows rows(x, idx, gamma);
    DualSolution sol = solve_dual(y, C, rows, opts);
    SmoResult out;
    out.machine = make_machine(x, idx, y, sol, C, gamma);
    out.iterations = sol.iterations;
    out.max_violation = sol.violation;
    out.alpha = std::move(sol.alpha);
    return out;
}

PlattParams platt_fit(std::span<const double> dec, std::span<const int> labels) {
    if (dec.size() != labels.size()) throw Error(ErrorCode::DimensionMismatch, "platt_fit: size mismatch");
    double prior1 = 0, prior0 = 0;
    for (int l : labels) (l > 0 ? prior1 : prior0) += 1;
    if (prior1 == 0 || prior0 == 0) throw Error(ErrorCode::SingleClass, "platt_fit needs both labels");

    PlattParams p{0.0, std::log((prior0 + 1.0) / (prior1 + 1.0))};
    if (std::all_of(dec.begin(), dec.end(), [&](double v) { return v == dec.front(); })) return p;

    const double hi = (prior1 + 1.0) / (prior1 + 2.0), lo = 1.0 / (prior0 + 2.0);
    std::vector<double> t(dec.size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = labels[i] > 0 ? hi : lo;

    auto objective = [&](double A, double B) {
        double f = 0;
        for (std::size_t i = 0; i < dec.size(); ++i) {
            const double z = dec[i] * A + B;
            f += z >= 0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1) * z + std::log1p(std::exp(z));
        }
        return f;
    };

    constexpr double kSigma = 1e-12, kEps = 1e-10, kMinStep = 1e-10;
    double fval = objective(p.A, p.B);
    for (int iter = 0; iter < 100; ++iter) {
        double h11 = kSigma, h22 = kSigma, h21 = 0, g1 = 0, g2 = 0;
        for (std::size_t i = 0; i < dec.size(); ++i) {
            const double z = dec[i] * p.A + p.B;
            double pr, q;
            if (z >= 0) {
                pr = std::exp(-z) / (1.0 + std::exp(-z));
                q = 1.0 / (1.0 + std::exp(-z));
            } else {
                pr = 1.0 / (1.0 + std::exp(z));
                q = std::exp(z) / (1.0 + std::exp(z));
            }
            const double d2 = pr * q;
            h11 += dec[i] * dec[i] * d2;
            h22 += d2;
            h21 += dec[i] * d2;
            const double d1 = t[i] - pr;
            g1 += dec[i] * d1;
            g2 += d1;
        }
        if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;
        const double det = h11 * h22 - h21 * h21;
        const double dA = -(h22 * g1 - h21 * g2) / det;
        const double dB = -(-h21 * g1 + h11 * g2) / det;
        const double gd = g1 * dA + g2 * dB;
        double step = 1.0;
        while (step >= kMinStep) {
            const double nA = p.A + step * dA, nB = p.B + step * dB;
            const double nf = objective(nA, nB);
            if (nf < fval + 1e-4 * step * gd) {
                p = {nA, nB};
                fval = nf;
                break;
            }
            step /= 2;
        }
        if (step < kMinStep) break;
    }
    return p;
}

std::vector<int> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed) {
    if (k < 2) throw Error(ErrorCode::InvalidArgument, "need at least two folds");
    int classes = 0;
    for (int l : labels) {
        if (l < 0) throw Error(ErrorCode::InvalidArgument, "negative class label");
        classes = std::max(classes, l + 1);
    }
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(classes));
    for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
    std::mt19937_64 rng(seed);
    std::vector<int> fold(labels.size(), 0);
    for (auto& m : members) {
        for (std::size_t i = m.size(); i > 1; --i) std::swap(m[i - 1], m[fisher_yates_draw(rng, i)]);
        for (std::size_t t = 0; t < m.size(); ++t) fold[m[t]] = static_cast<int>(t % k);
    }
    return fold;
}

SvmModel train_multiclass(const LabeledDataset& data, double C, double gamma,
                          features::ScalingParams scaling, const TrainOptions& opts) {
    data.validate();
    if (!(gamma > 0)) throw Error(ErrorCode::InvalidArgument, "gamma must be > 0");
    const std::span<const FeatureVector> x = data.vectors;
    std::unique_ptr<Gram> gram;
    if (gram_fits(x.size(), opts.smo.cache_bytes)) gram = std::make_unique<Gram>(x, gamma);

    SvmModel model;
    model.class_names = data.class_names;
    model.scaling = std::move(scaling);
    model.C = C;
    model.gamma = gamma;

    std::vector<std::size_t> all(x.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const int K = data.class_count();
    for (int a = 0; a < K; ++a)
        for (int b = a + 1; b < K; ++b) {
            const PairSubset pair = pair_subset(data.labels, all, a, b);

            // Decision values for calibration come from machines that never
            // saw the sample being scored.
            std::vector<int> cls(pair.y.size());
            for (std::size_t t = 0; t < cls.size(); ++t) cls[t] = pair.y[t] > 0 ? 0 : 1;
            const std::vector<int> fold = stratified_folds(cls, opts.platt_folds, opts.seed);
            std::vector<double> dec(pair.idx.size(), 0.0);
            for (int f = 0; f < opts.platt_folds; ++f) {
                std::vector<std::size_t> tr_idx;
                std::vector<int> tr_y;
                for (std::size_t t = 0; t < pair.idx.size(); ++t)
                    if (fold[t] != f) {
                        tr_idx.push_back(pair.idx[t]);
                        tr_y.push_back(pair.y[t]);
                    }
                const bool has_pos = std::find(tr_y.begin(), tr_y.end(), 1) != tr_y.end();
                const bool has_neg = std::find(tr_y.begin(), tr_y.end(), -1) != tr_y.end();
                if (!has_pos || !has_neg) {
                    for (std::size_t t = 0; t < pair.idx.size(); ++t)
                        if (fold[t] == f) dec[t] = has_pos ? 1.0 : -1.0;
                    continue;
                }
                const auto rows = rows_for(gram.get(), x, tr_idx, gamma);
                const DualSolution sol = solve_dual(tr_y, C, *rows, opts.smo);
                for (std::size_t t = 0; t < pair.idx.size(); ++t)
                    if (fold[t] == f)
                        dec[t] = subset_decision(gram.get(), x, gamma, tr_idx, tr_y, sol, pair.idx[t]);
            }

            const auto rows = rows_for(gram.get(), x, pair.idx, gamma);
            const DualSolution sol = solve_dual(pair.y, C, *rows, opts.smo);
            PairMachine pm;
            pm.positive = a;
            pm.negative = b;
            pm.svm = make_machine(x, pair.idx, pair.y, sol, C, gamma);
            pm.platt = platt_fit(dec, pair.y);
            model.machines.push_back(std::move(pm));
        }
    return model;
}

SvmModel train_scaled(const LabeledDataset& raw, double C, double gamma, const TrainOptions& opts) {
    raw.validate();
    features::ScalingParams scaling = features::fit_scaling(raw.vectors);
    LabeledDataset scaled = raw;
    for (auto& v : scaled.vectors) v = features::apply_scaling(v, scaling);
    return train_multiclass(scaled, C, gamma, std::move(scaling), opts);
}

namespace {

// Pairwise coupling: minimise sum_{i<j} (r_ji p_i - r_ij p_j)^2 over the
// simplex by the fixed-point iteration of Wu, Lin and Weng.
std::vector<double> couple_pairwise(std::vector<double> r, std::size_t n) {
    constexpr double kClip = 1e-7, kEps = 1e-12;
    for (double& x : r) x = std::clamp(x, kClip, 1.0 - kClip);
    std::vector<double> Q(n * n, 0.0);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t j = 0; j < n; ++j) {
            if (j == t) continue;
            Q[t * n + t] += r[j * n + t] * r[j * n + t];
            Q[t * n + j] = -r[j * n + t] * r[t * n + j];
        }
    std::vector<double> p(n, 1.0 / static_cast<double>(n)), Qp(n);
    const int max_iter = std::max(1000, static_cast<int>(10 * n));
    for (int iter = 0; iter < max_iter; ++iter) {
        double pQp = 0;
        for (std::size_t t = 0; t < n; ++t) {
            Qp[t] = 0;
            for (std::size_t j = 0; j < n; ++j) Qp[t] += Q[t * n + j] * p[j];
            pQp += p[t] * Qp[t];
        }
        double worst = 0;
        for (std::size_t t = 0; t < n; ++t) worst = std::max(worst, std::abs(Qp[t] - pQp));
        if (worst < kEps) break;
        for (std::size_t t = 0; t < n; ++t) {
            const double diff = (pQp - Qp[t]) / Q[t * n + t];
            p[t] += diff;
            pQp = (pQp + diff * (diff * Q[t * n + t] + 2 * Qp[t])) / ((1 + diff) * (1 + diff));
            for (std::size_t j = 0; j < n; ++j) {
                Qp[j] = (Qp[j] + diff * Q[t * n + j]) / (1 + diff);
                p[j] /= 1 + diff;
            }
        }
    }
    double total = 0;
    for (double x : p) total += x;
    for (double& x : p) x /= total;
    return p;
}

}  // namespace

std::vector<double> predict_proba_scaled(const SvmModel& model, std::span<const double> v) {
    const int K = model.class_count();
    if (K < 2) throw Error(ErrorCode::InvalidArgument, "model has fewer than two classes");
    if (model.machines.size() != static_cast<std::size_t>(K * (K - 1) / 2))
        throw Error(ErrorCode::MalformedFile, "model machine count does not match its classes");
    const auto n = static_cast<std::size_t>(K);
    std::vector<double> r(n * n, 0.0);  // r[i*K+j] = P(i | i or j)
    for (const auto& m : model.machines) {
        if (!m.svm.support_vectors.empty() && m.svm.support_vectors.front().size() != v.size())
            throw Error(ErrorCode::DimensionMismatch, "query dimension does not match the model");
        const double q = m.platt.probability(m.svm.decision(v));
        r[static_cast<std::size_t>(m.positive) * n + m.negative] = q;
        r[static_cast<std::size_t>(m.negative) * n + m.positive] = 1.0 - q;
    }
    if (K == 2) return {r[1], r[2]};
    return couple_pairwise(r, n);
}

std::vector<double> predict_proba(const SvmModel& model, std::span<const double> v) {
    if (v.size() != model.dimension())
        throw Error(ErrorCode::DimensionMismatch, "query dimension does not match the model");
    const FeatureVector s = features::apply_scaling(v, model.scaling);
    return predict_proba_scaled(model, s);
}

int predict_vote_scaled(const SvmModel& model, std::span<const double> v) {
    std::vector<int> votes(static_cast<std::size_t>(model.class_count()), 0);
    for (const auto& m : model.machines) ++votes[m.svm.decision(v) > 0 ? m.positive : m.negative];
    return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

GridSpec GridSpec::standard() {
    GridSpec g;
    for (int e = -5; e <= 15; e += 2) g.C.push_back(std::ldexp(1.0, e));
    for (int e = -15; e <= 3; e += 2) g.gamma.push_back(std::ldexp(1.0, e));
    return g;
}

CvReport grid_search_cv(const LabeledDataset& data, const GridSpec& grid, int k, std::uint64_t seed,
                        const SmoOptions& smo) {
    if (k < 2) throw Error(ErrorCode::InvalidArgument, "need at least two folds");
    data.validate(static_cast<std::size_t>(k));
    if (grid.C.empty() || grid.gamma.empty()) throw Error(ErrorCode::InvalidArgument, "empty grid");

    const std::span<const FeatureVector> x = data.vectors;
    const std::vector<int> fold = stratified_folds(data.labels, k, seed);
    const int K = data.class_count();

    CvReport report;
    report.folds = k;
    report.seed = seed;
    for (double gamma : grid.gamma) {
        std::unique_ptr<Gram> gram;
        if (gram_fits(x.size(), smo.cache_bytes)) gram = std::make_unique<Gram>(x, gamma);
        for (double C : grid.C) {
            GridPoint gp{C, gamma, 0.0, false};
            try {
                double acc_sum = 0;
                for (int f = 0; f < k; ++f) {
                    std::vector<std::size_t> train, test;
                    for (std::size_t i = 0; i < x.size(); ++i) (fold[i] == f ? test : train).push_back(i);
                    std::vector<std::vector<int>> votes(test.size(), std::vector<int>(K, 0));
                    for (int a = 0; a < K; ++a)
                        for (int b = a + 1; b < K; ++b) {
                            const PairSubset pair = pair_subset(data.labels, train, a, b);
                            const auto rows = rows_for(gram.get(), x, pair.idx, gamma);
                            const DualSolution sol = solve_dual(pair.y, C, *rows, smo);
                            for (std::size_t t = 0; t < test.size(); ++t) {
                                const double d =
                                    subset_decision(gram.get(), x, gamma, pair.idx, pair.y, sol, test[t]);
                                ++votes[t][d > 0 ? a : b];
                            }
                        }
                    std::size_t correct = 0;
                    for (std::size_t t = 0; t < test.size(); ++t) {
                        const int pred = static_cast<int>(
                            std::max_element(votes[t].begin(), votes[t].end()) - votes[t].begin());
                        correct += pred == data.labels[test[t]];
                    }
                    acc_sum += static_cast<double>(correct) / static_cast<double>(test.size());
                }
                gp.mean_accuracy = acc_sum / k;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::TrainingStalled) throw;
                gp.stalled = true;
            }
            report.grid.push_back(gp);
        }
    }

    const GridPoint* best = nullptr;
    for (const auto& gp : report.grid) {
        if (!best || gp.mean_accuracy > best->mean_accuracy ||
            (gp.mean_accuracy == best->mean_accuracy &&
             (gp.C < best->C || (gp.C == best->C && gp.gamma < best->gamma))))
            best = &gp;
    }
    report.best_C = best->C;
    report.best_gamma = best->gamma;
    report.best_accuracy = best->mean_accuracy;
    return report;
}

}  // namespace leafdx::svm
