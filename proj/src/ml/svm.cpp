#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bdf/error.hpp"
#include "bdf/ml.hpp"

namespace bdf::ml {

namespace {

constexpr double kTau = 1e-12;
constexpr std::size_t kMaxCachedRows = 3000;

double rbf(std::span<const double> a, std::span<const double> b, double gamma) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double t = a[k] - b[k];
        d += t * t;
    }
    return std::exp(-gamma * d);
}

struct Problem {
    std::size_t n = 0;
    std::size_t width = 0;
    std::vector<double> x;  // standardized rows
    std::vector<double> y;  // +1 / -1

    std::span<const double> row(std::size_t i) const { return std::span<const double>(x).subspan(i * width, width); }
};

// Kernel rows, precomputed when the problem is small enough.
class KernelMatrix {
public:
    KernelMatrix(const Problem& p, double gamma) : p_(p), gamma_(gamma) {
        if (p.n <= kMaxCachedRows) {
            full_.resize(p.n * p.n);
            for (std::size_t i = 0; i < p.n; ++i) {
                full_[i * p.n + i] = 1.0;
                for (std::size_t j = 0; j < i; ++j) {
                    const double k = rbf(p.row(i), p.row(j), gamma);
                    full_[i * p.n + j] = k;
                    full_[j * p.n + i] = k;
                }
            }
        } else {
            scratch_[0].resize(p.n);
            scratch_[1].resize(p.n);
        }
    }

    // Valid until the next call with the same slot.
    std::span<const double> row(std::size_t i, int slot) {
        if (!full_.empty()) return std::span<const double>(full_).subspan(i * p_.n, p_.n);
        auto& r = scratch_[slot];
        for (std::size_t j = 0; j < p_.n; ++j) r[j] = rbf(p_.row(i), p_.row(j), gamma_);
        return r;
    }

private:
    const Problem& p_;
    double gamma_;
    std::vector<double> full_;
    std::vector<double> scratch_[2];
};

struct DualSolution {
    std::vector<double> alpha;
    double rho = 0.0;
};

// SMO for the C-SVC dual with second-order working set selection.
DualSolution solve_dual(const Problem& p, double gamma, const SvmConfig& cfg) {
    const std::size_t n = p.n;
    const double c = cfg.c;
    KernelMatrix kernel(p, gamma);
    std::vector<double> alpha(n, 0.0), grad(n, -1.0);
    const auto& y = p.y;
    auto upper = [&](std::size_t t) { return alpha[t] >= c; };
    auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

    for (std::int64_t iter = 0; iter < cfg.max_iterations; ++iter) {
        double gmax = -std::numeric_limits<double>::infinity();
        double gmax2 = -std::numeric_limits<double>::infinity();
        std::ptrdiff_t i_sel = -1, j_sel = -1;
        for (std::size_t t = 0; t < n; ++t) {
            if (y[t] > 0) {
                if (!upper(t) && -grad[t] >= gmax) {
                    gmax = -grad[t];
                    i_sel = static_cast<std::ptrdiff_t>(t);
                }
            } else if (!lower(t) && grad[t] >= gmax) {
                gmax = grad[t];
                i_sel = static_cast<std::ptrdiff_t>(t);
            }
        }
        if (i_sel < 0) break;
        const auto i = static_cast<std::size_t>(i_sel);
        const auto ki = kernel.row(i, 0);
        double obj_min = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < n; ++t) {
            double grad_diff;
            if (y[t] > 0) {
                if (lower(t)) continue;
                grad_diff = gmax + grad[t];
                gmax2 = std::max(gmax2, grad[t]);
            } else {
                if (upper(t)) continue;
                grad_diff = gmax - grad[t];
                gmax2 = std::max(gmax2, -grad[t]);
            }
            const double quad = 2.0 - 2.0 * ki[t];  // K_ii + K_tt - 2 K_it for the RBF kernel
            if (grad_diff > 0.0) {
                const double obj = -(grad_diff * grad_diff) / (quad > 0.0 ? quad : kTau);
                if (obj <= obj_min) {
                    obj_min = obj;
                    j_sel = static_cast<std::ptrdiff_t>(t);
                }
            }
        }
        if (gmax + gmax2 < cfg.tolerance || j_sel < 0) break;
        const auto j = static_cast<std::size_t>(j_sel);
        const auto kj = kernel.row(j, 1);

        const double old_ai = alpha[i], old_aj = alpha[j];
        const double qij = y[i] * y[j] * ki[j];
        if (y[i] != y[j]) {
            double quad = 2.0 + 2.0 * qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0.0) {
                if (alpha[j] < 0.0) {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if (diff > 0.0) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if (alpha[j] > c) {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            double quad = 2.0 - 2.0 * qij;
            if (quad <= 0.0) quad = kTau;
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if (alpha[j] < 0.0) {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if (sum > c) {
                if (alpha[j] > c) {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
        for (std::size_t t = 0; t < n; ++t) grad[t] += y[t] * (y[i] * ki[t] * dai + y[j] * kj[t] * daj);
    }

    // Bias from free vectors, or the midpoint of the feasible interval.
    double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    std::size_t free_count = 0;
    for (std::size_t t = 0; t < n; ++t) {
        const double yg = y[t] * grad[t];
        if (upper(t)) {
            if (y[t] < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (lower(t)) {
            if (y[t] > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++free_count;
            sum_free += yg;
        }
    }
    DualSolution sol;
    sol.rho = free_count > 0 ? sum_free / static_cast<double>(free_count) : (ub + lb) / 2.0;
    sol.alpha = std::move(alpha);
    return sol;
}

// Trains the kernel machine on already standardized rows (no Platt step).
SvmModel fit_kernel_machine(const Problem& p, double gamma, const SvmConfig& cfg) {
    const auto sol = solve_dual(p, gamma, cfg);
    SvmModel m;
    m.gamma = gamma;
    m.rho = sol.rho;
    for (std::size_t i = 0; i < p.n; ++i) {
        if (sol.alpha[i] > 0.0) {
            const auto r = p.row(i);
            m.support.insert(m.support.end(), r.begin(), r.end());
            m.coef.push_back(p.y[i] * sol.alpha[i]);
        }
    }
    return m;
}

double raw_decision(const SvmModel& m, std::span<const double> z, std::size_t width) {
    double f = -m.rho;
    for (std::size_t s = 0; s < m.coef.size(); ++s) {
        f += m.coef[s] * rbf(std::span<const double>(m.support).subspan(s * width, width), z, m.gamma);
    }
    return f;
}

Problem subproblem(const Problem& p, std::span<const std::size_t> idx) {
    Problem q;
    q.n = idx.size();
    q.width = p.width;
    for (auto i : idx) {
        const auto r = p.row(i);
        q.x.insert(q.x.end(), r.begin(), r.end());
        q.y.push_back(p.y[i]);
    }
    return q;
}

}  // namespace

double SvmModel::decision(std::span<const double> x) const {
    const std::size_t width = feature_mean.size();
    std::vector<double> z(width);
    for (std::size_t k = 0; k < width; ++k) z[k] = (x[k] - feature_mean[k]) / feature_scale[k];
    return raw_decision(*this, z, width);
}

double SvmModel::probability_from_decision(double f) const {
    const double fapb = f * platt_a + platt_b;
    // Numerically stable 1 / (1 + exp(fapb)).
    if (fapb >= 0.0) {
        const double e = std::exp(-fapb);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(fapb));
}

std::pair<double, double> fit_platt(std::span<const double> dec, std::span<const int> labels) {
    const std::size_t n = dec.size();
    double prior1 = 0.0, prior0 = 0.0;
    for (int l : labels) (l == kUpconverted ? prior1 : prior0) += 1.0;
    constexpr int kMaxIter = 100;
    constexpr double kMinStep = 1e-10;
    constexpr double kSigma = 1e-12;
    constexpr double kEps = 1e-5;
    const double hi = (prior1 + 1.0) / (prior1 + 2.0);
    const double lo = 1.0 / (prior0 + 2.0);
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = labels[i] == kUpconverted ? hi : lo;

    auto objective = [&](double a, double b) {
        double f = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double fapb = dec[i] * a + b;
            f += fapb >= 0.0 ? t[i] * fapb + std::log1p(std::exp(-fapb)) : (t[i] - 1.0) * fapb + std::log1p(std::exp(fapb));
        }
        return f;
    };
    double a = 0.0, b = std::log((prior0 + 1.0) / (prior1 + 1.0));
    double fval = objective(a, b);
    for (int iter = 0; iter < kMaxIter; ++iter) {
        double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double fapb = dec[i] * a + b;
            double p, q;
            if (fapb >= 0.0) {
                const double e = std::exp(-fapb);
                p = e / (1.0 + e);
                q = 1.0 / (1.0 + e);
            } else {
                const double e = std::exp(fapb);
                p = 1.0 / (1.0 + e);
                q = e / (1.0 + e);
            }
            const double d2 = p * q;
            h11 += dec[i] * dec[i] * d2;
            h22 += d2;
            h21 += dec[i] * d2;
            const double d1 = t[i] - p;
            g1 += dec[i] * d1;
            g2 += d1;
        }
        if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;
        const double det = h11 * h22 - h21 * h21;
        const double da = -(h22 * g1 - h21 * g2) / det;
        const double db = -(-h21 * g1 + h11 * g2) / det;
        const double gd = g1 * da + g2 * db;
        double step = 1.0;
        while (step >= kMinStep) {
            const double na = a + step * da, nb = b + step * db;
            const double nf = objective(na, nb);
            if (nf < fval + 0.0001 * step * gd) {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if (step < kMinStep) break;
    }
    return {a, b};
}

SvmModel train_svm(const SvmConfig& cfg, const Dataset& data) {
    if (data.empty()) throw Error(ErrorKind::EmptyInput, "empty training set");
    if (cfg.c <= 0.0 || cfg.tolerance <= 0.0 || cfg.platt_folds < 2)
        throw Error(ErrorKind::Config, "invalid SVM configuration");
    const std::size_t width = data.width();
    const auto order = data.canonical_order();

    std::vector<double> mean(width, 0.0), scale(width, 0.0);
    for (auto i : order) {
        const auto r = data.row(i);
        for (std::size_t k = 0; k < width; ++k) mean[k] += r[k];
    }
    for (auto& m : mean) m /= static_cast<double>(order.size());
    for (auto i : order) {
        const auto r = data.row(i);
        for (std::size_t k = 0; k < width; ++k) scale[k] += (r[k] - mean[k]) * (r[k] - mean[k]);
    }
    for (auto& s : scale) {
        s = std::sqrt(s / static_cast<double>(order.size()));
        if (!(s > 0.0)) s = 1.0;
    }

    Problem p;
    p.n = order.size();
    p.width = width;
    for (auto i : order) {
        const auto r = data.row(i);
        for (std::size_t k = 0; k < width; ++k) p.x.push_back((r[k] - mean[k]) / scale[k]);
        p.y.push_back(data.label(i) == kUpconverted ? 1.0 : -1.0);
    }

    double gamma = cfg.gamma;
    if (gamma <= 0.0) {
        double m = 0.0;
        for (double v : p.x) m += v;
        m /= static_cast<double>(p.x.size());
        double var = 0.0;
        for (double v : p.x) var += (v - m) * (v - m);
        var /= static_cast<double>(p.x.size());
        gamma = 1.0 / (static_cast<double>(width) * (var > 0.0 ? var : 1.0));
    }

    SvmModel model = fit_kernel_machine(p, gamma, cfg);
    model.feature_mean = std::move(mean);
    model.feature_scale = std::move(scale);

    // Out-of-fold decision values for the sigmoid; rows are dealt to folds
    // round-robin in canonical order, separately per class.
    const auto folds = static_cast<std::size_t>(cfg.platt_folds);
    std::vector<std::size_t> fold_of(p.n);
    std::size_t pos_seen = 0, neg_seen = 0;
    for (std::size_t i = 0; i < p.n; ++i) fold_of[i] = p.y[i] > 0 ? pos_seen++ % folds : neg_seen++ % folds;
    std::vector<double> dec(p.n, 0.0);
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> train_idx, test_idx;
        for (std::size_t i = 0; i < p.n; ++i) (fold_of[i] == f ? test_idx : train_idx).push_back(i);
        if (test_idx.empty()) continue;
        const auto sub = subproblem(p, train_idx);
        const bool has_pos = std::any_of(sub.y.begin(), sub.y.end(), [](double v) { return v > 0; });
        const bool has_neg = std::any_of(sub.y.begin(), sub.y.end(), [](double v) { return v < 0; });
        if (!has_pos || !has_neg) {
            for (auto i : test_idx) dec[i] = has_pos ? 1.0 : -1.0;
            continue;
        }
        const auto fold_model = fit_kernel_machine(sub, gamma, cfg);
        for (auto i : test_idx) dec[i] = raw_decision(fold_model, p.row(i), width);
    }
    std::vector<int> labels(p.n);
    for (std::size_t i = 0; i < p.n; ++i) labels[i] = p.y[i] > 0 ? kUpconverted : kNative;
    std::tie(model.platt_a, model.platt_b) = fit_platt(dec, labels);
    return model;
}

}  // namespace bdf::ml
