#ifndef MAXCQ_CONVOLUTION_HPP
#define MAXCQ_CONVOLUTION_HPP

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "maxcq/cq_weights.hpp"
#include "maxcq/discretization.hpp"
#include "maxcq/material.hpp"

namespace maxcq {

/// Stored e-field history e^0..e^n for the direct engine.
struct HistoryBuffer {
    std::vector<Eigen::VectorXd> entries;

    long current_step() const { return static_cast<long>(entries.size()) - 1; }
};

/// Nodewise direct convolution sum_{k=0}^{n} omega_{nv-k} e^k at virtual
/// step nv, with each node using its material region's weight table.
/// Non-dispersive materials contribute nothing and are skipped.
class RegionWeights {
  public:
    RegionWeights() = default;
    RegionWeights(const DiscreteOperators& ops,
                  const std::map<std::string, WeightTable>& tables,
                  const MaterialLayout& layout) {
        n_nodes_ = ops.mesh.n_nodes();
        for (std::size_t mi = 0; mi < layout.materials.size(); ++mi) {
            const MaterialModel& m = layout.materials[mi];
            if (!m.dispersive()) continue;
            const auto it = tables.find(m.name);
            if (it == tables.end()) {
                throw std::invalid_argument("RegionWeights: no weight table for material '" +
                                            m.name + "'");
            }
            std::vector<Eigen::Index> idx;
            for (Eigen::Index j = 0; j < n_nodes_; ++j) {
                if (ops.node_material[static_cast<std::size_t>(j)] ==
                    static_cast<Eigen::Index>(mi)) {
                    idx.push_back(j);
                }
            }
            if (idx.empty()) continue;
            regions_.push_back({std::move(idx), it->second});
        }
    }

    Eigen::Index n_nodes() const { return n_nodes_; }

    long min_table_length() const {
        long len = -1;
        for (const Region& r : regions_) {
            const long l = static_cast<long>(r.table.size());
            if (len < 0 || l < len) len = l;
        }
        return len;
    }

    /// out += omega(lag) .* e, restricted to dispersive regions.
    void accumulate(Eigen::VectorXd& out, const Eigen::VectorXd& e, long lag) const {
        for (const Region& r : regions_) {
            if (lag >= r.table.size()) {
                throw std::runtime_error("RegionWeights: weight table exhausted at lag " +
                                         std::to_string(lag));
            }
            const double w = r.table.weights[lag];
            if (w == 0.0) continue;
            for (const Eigen::Index j : r.idx) out[j] += w * e[j];
        }
    }

    /// omega(lag) as a nodal diagonal (zero off dispersive regions).
    Eigen::ArrayXd nodal_weight(long lag) const {
        Eigen::ArrayXd out = Eigen::ArrayXd::Zero(n_nodes_);
        for (const Region& r : regions_) {
            if (lag >= r.table.size()) {
                throw std::runtime_error("RegionWeights: weight table exhausted at lag " +
                                         std::to_string(lag));
            }
            for (const Eigen::Index j : r.idx) out[j] = r.table.weights[lag];
        }
        return out;
    }

  private:
    struct Region {
        std::vector<Eigen::Index> idx;
        WeightTable table;  // owned copy so the source map may be temporary
    };
    Eigen::Index n_nodes_ = 0;
    std::vector<Region> regions_;
};

inline Eigen::VectorXd direct_convolve(const RegionWeights& weights, const HistoryBuffer& history,
                                       long nv) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(weights.n_nodes());
    const long n = history.current_step();
    for (long k = 0; k <= n; ++k) {
        weights.accumulate(out, history.entries[static_cast<std::size_t>(k)], nv - k);
    }
    return out;
}

/// Scalar variant for oracle tests: p^nv = sum_{k} omega_{nv-k} e^k.
inline double direct_convolve(const WeightTable& table, const std::vector<double>& history,
                              long nv) {
    double out = 0.0;
    for (long k = 0; k < static_cast<long>(history.size()); ++k) {
        const long lag = nv - k;
        if (lag < 0) continue;
        if (lag >= table.size()) throw std::runtime_error("direct_convolve: table exhausted");
        out += table.weights[lag] * history[static_cast<std::size_t>(k)];
    }
    return out;
}

/// Common interface of the two convolution engines. append(e^n) feeds the
/// next field; query_next() returns q^{n+1} = sum_{k<=n} omega_{n+1-k} e^k,
/// the convolution lagged by one step as consumed by the CQ stepper.
class ConvolutionEngine {
  public:
    virtual ~ConvolutionEngine() = default;
    virtual void append(const Eigen::VectorXd& e) = 0;
    virtual Eigen::VectorXd query_next() const = 0;
    virtual long current_step() const = 0;
    virtual long stored_vectors() const = 0;
    virtual bool accuracy_degraded() const { return false; }
};

class DirectEngine final : public ConvolutionEngine {
  public:
    explicit DirectEngine(RegionWeights weights) : weights_(std::move(weights)) {}

    void append(const Eigen::VectorXd& e) override { history_.entries.push_back(e); }

    Eigen::VectorXd query_next() const override {
        const long n = history_.current_step();
        if (n < 0) throw std::runtime_error("DirectEngine: query before first append");
        return direct_convolve(weights_, history_, n + 1);
    }

    long current_step() const override { return history_.current_step(); }
    long stored_vectors() const override { return static_cast<long>(history_.entries.size()); }

    const HistoryBuffer& history() const { return history_; }
    const RegionWeights& weights() const { return weights_; }

  private:
    RegionWeights weights_;
    HistoryBuffer history_;
};

struct FocqParams {
    int base = 2;              // block growth factor B
    int contour_nodes = 24;    // quadrature nodes per level, K_q
    double tolerance = 1e-6;   // documented accuracy target vs the direct engine
    double nu = 2.0;           // Talbot contour scale
    double sigma = 1.0;        // Talbot contour tilt
    double mfac = 1.0;         // contour reference lag in units of the block length
    long horizon = 1L << 22;   // maximum supported step count
};

/// Fast-and-oblivious convolution via a ladder of block levels. Level l
/// aggregates blocks of B^l consecutive inputs into K_q contour-node states
/// obtained from trapezoidal integration of dy/dt = lambda_j y + e along a
/// Talbot contour scaled to the level's lag range; a queried lag is covered
/// by an exact head (recent steps) plus one closed block per scale. All
/// levels accumulate from step 0 so every block boundary aligned range is
/// available; closed blocks are pruned once the next coarser level covers
/// them, which bounds storage by O(B K_q log n).
class FocqEngine final : public ConvolutionEngine {
  public:
    FocqEngine(const DiscreteOperators& ops, const MaterialLayout& layout,
               const std::map<std::string, WeightTable>& head_tables, double tau_step,
               const PhysicalConstants& constants, FocqParams params = {})
        : params_(params),
          tau_(tau_step),
          n_nodes_(ops.mesh.n_nodes()),
          head_weights_(ops, head_tables, layout) {
        if (params_.base < 2) throw std::invalid_argument("FocqEngine: base must be >= 2");
        if (params_.contour_nodes < 4) {
            throw std::invalid_argument("FocqEngine: need at least 4 contour nodes");
        }
        lev0_ = 1;
        while (ipow(params_.base, lev0_) < 32) ++lev0_;
        head_len_ = ipow(params_.base, lev0_);
        int lmax = lev0_;
        while (ipow(params_.base, lmax) < params_.horizon) ++lmax;
        const long min_head_table = head_weights_.min_table_length();
        if (min_head_table >= 0 && min_head_table < 2 * head_len_ + 2) {
            throw std::invalid_argument("FocqEngine: head weight tables need length >= " +
                                        std::to_string(2 * head_len_ + 2));
        }
        // Per-node kernel factors eps0*chi_hat(lambda_j) by material region.
        std::vector<const MaterialModel*> mat_of_node(static_cast<std::size_t>(n_nodes_));
        for (Eigen::Index j = 0; j < n_nodes_; ++j) {
            mat_of_node[static_cast<std::size_t>(j)] =
                &layout.materials[static_cast<std::size_t>(
                    ops.node_material[static_cast<std::size_t>(j)])];
        }
        const double pi = 3.14159265358979323846;
        const int kq = params_.contour_nodes;
        for (int lev = lev0_; lev <= lmax; ++lev) {
            Level lv;
            lv.block_len = ipow(params_.base, lev);
            lv.level = lev;
            const double m_ref = params_.mfac * static_cast<double>(lv.block_len);
            lv.r0.resize(kq);
            lv.g.resize(kq);
            lv.quadw.resize(kq);
            lv.kfac.assign(static_cast<std::size_t>(kq), Eigen::ArrayXcd(n_nodes_));
            for (int j = 0; j < kq; ++j) {
                const double th = (static_cast<double>(j) + 0.5) * pi / static_cast<double>(kq);
                const Complex z = (params_.nu / m_ref) *
                                  Complex(th / std::tan(th), params_.sigma * th);
                const Complex dz = (params_.nu / m_ref) *
                                   Complex(1.0 / std::tan(th) -
                                               th / (std::sin(th) * std::sin(th)),
                                           params_.sigma);
                lv.quadw[static_cast<std::size_t>(j)] =
                    (pi / static_cast<double>(kq)) * dz / tau_;
                lv.r0[static_cast<std::size_t>(j)] = tau_ / (2.0 - z);
                lv.g[static_cast<std::size_t>(j)] = (2.0 + z) / (2.0 - z);
                const Complex lambda = z / tau_;
                Eigen::ArrayXcd& kf = lv.kfac[static_cast<std::size_t>(j)];
                for (Eigen::Index node = 0; node < n_nodes_; ++node) {
                    kf[node] = constants.eps0 *
                               chi_hat(*mat_of_node[static_cast<std::size_t>(node)], lambda);
                }
            }
            lv.y.assign(static_cast<std::size_t>(kq), Eigen::ArrayXcd::Zero(n_nodes_));
            lv.accum_from = 0;
            levels_.push_back(std::move(lv));
        }
        estimate_accuracy(layout, constants);
    }

    void append(const Eigen::VectorXd& e) override {
        ++n_;
        if (n_ >= params_.horizon) throw std::runtime_error("FocqEngine: horizon exceeded");
        const auto prev_it = head_.find(n_ - 1);
        head_.emplace(n_, e);
        for (Level& lv : levels_) {
            if (n_ < lv.accum_from) continue;
            if (n_ == lv.accum_from) {
                for (std::size_t j = 0; j < lv.y.size(); ++j) {
                    lv.y[j] = lv.r0[j] * e.array();
                }
            } else {
                const Eigen::ArrayXd sum =
                    (prev_it == head_.end()) ? Eigen::ArrayXd(e.array())
                                             : Eigen::ArrayXd(e.array() + prev_it->second.array());
                for (std::size_t j = 0; j < lv.y.size(); ++j) {
                    lv.y[j] = lv.g[j] * lv.y[j] + lv.r0[j] * sum;
                }
            }
            if ((n_ + 1) % lv.block_len == 0) {
                if (lv.accum_from == n_ + 1 - lv.block_len) {
                    std::vector<Eigen::ArrayXcd> s(lv.y.size());
                    for (std::size_t j = 0; j < lv.y.size(); ++j) {
                        s[j] = lv.g[j] * lv.y[j] + lv.r0[j] * e.array();
                    }
                    lv.blocks.emplace(n_, std::move(s));
                }
                for (std::size_t j = 0; j < lv.y.size(); ++j) {
                    lv.y[j].setZero();
                }
                lv.accum_from = n_ + 1;
            }
        }
        prune();
    }

    Eigen::VectorXd query_next() const override { return query(1); }

    /// Convolution at virtual step nv = n + offset using history e^0..e^n.
    Eigen::VectorXd query(long offset) const {
        if (n_ < 0) throw std::runtime_error("FocqEngine: query before first append");
        const long nv = n_ + offset;
        const long bstar = boundary_below(nv);
        Eigen::VectorXd total = Eigen::VectorXd::Zero(n_nodes_);
        const long lo = bstar;
        for (long k = lo + 1; k <= n_; ++k) {
            head_weights_.accumulate(total, head_.at(k), nv - k);
        }
        long cursor = lo;
        while (cursor >= 0) {
            const Level* chosen = nullptr;
            for (auto it = levels_.rbegin(); it != levels_.rend(); ++it) {
                const Level& lv = *it;
                if ((cursor + 1) % lv.block_len != 0) continue;
                if (!lv.blocks.count(cursor)) continue;
                if (lv.level > lev0_ && nv - cursor < lv.block_len) continue;
                chosen = &lv;
                break;
            }
            if (!chosen) {
                throw std::runtime_error("FocqEngine: no block covering lag range at step " +
                                         std::to_string(cursor));
            }
            const std::vector<Eigen::ArrayXcd>& s = chosen->blocks.at(cursor);
            const double m = static_cast<double>(nv - cursor - 1);
            Eigen::ArrayXcd acc = Eigen::ArrayXcd::Zero(n_nodes_);
            for (std::size_t j = 0; j < s.size(); ++j) {
                const Complex coef = chosen->quadw[j] * std::pow(chosen->g[j], m);
                acc += coef * (chosen->kfac[j] * s[j]);
            }
            const double inv_pi = 1.0 / 3.14159265358979323846;
            total.array() += inv_pi * acc.imag();
            cursor -= chosen->block_len;
        }
        return total;
    }

    long current_step() const override { return n_; }

    long stored_vectors() const override {
        long count = static_cast<long>(head_.size());
        for (const Level& lv : levels_) {
            count += static_cast<long>(lv.y.size()) *
                     static_cast<long>(1 + lv.blocks.size());
        }
        return count;
    }

    bool accuracy_degraded() const override { return accuracy_degraded_; }
    double accuracy_estimate() const { return accuracy_estimate_; }
    int base_level() const { return lev0_; }

  private:
    struct Level {
        int level = 0;
        long block_len = 0;
        Eigen::ArrayXcd r0, g, quadw;        // per contour node
        std::vector<Eigen::ArrayXcd> kfac;   // per contour node, nodal kernel factor
        std::vector<Eigen::ArrayXcd> y;      // per contour node, open-block state
        long accum_from = 0;                 // first step folded into y
        std::map<long, std::vector<Eigen::ArrayXcd>> blocks;  // end step -> closed state
    };

    static long ipow(long b, int e) {
        long r = 1;
        for (int i = 0; i < e; ++i) r *= b;
        return r;
    }

    static long floordiv(long a, long b) { return (a >= 0) ? a / b : -((-a + b - 1) / b); }

    /// Largest head/ladder split point c with c = qH - 1, nv - c >= H, c <= n.
    long boundary_below(long nv) const {
        const long h = head_len_;
        long c = floordiv(nv - h, h) * h + h - 1;
        while (c >= 0 && nv - c < h) c -= h;
        if (c > n_) c -= h;
        return (c >= 0) ? c : -1;
    }

    void prune() {
        for (std::size_t i = 0; i + 1 < levels_.size(); ++i) {
            Level& lv = levels_[i];
            const Level& up = levels_[i + 1];
            const long bl1 = lv.block_len * params_.base;
            std::vector<long> drop;
            for (const auto& [b, s] : lv.blocks) {
                const long e = ((b + 1) % bl1 == 0) ? b : (floordiv(b, bl1) + 1) * bl1 - 1;
                if (up.blocks.count(e) && n_ - e >= bl1) drop.push_back(b);
            }
            for (const long b : drop) lv.blocks.erase(b);
        }
        const long bstar = boundary_below(n_);
        while (!head_.empty() && head_.begin()->first <= bstar) head_.erase(head_.begin());
    }

    /// Contour-quadrature weight approximation of lag m at one level,
    /// for a single-material kernel.
    double level_weight(const Level& lv, const MaterialModel& model,
                        const PhysicalConstants& constants, long m) const {
        Complex acc(0.0, 0.0);
        const double pi = 3.14159265358979323846;
        for (Eigen::Index j = 0; j < lv.r0.size(); ++j) {
            // contour point z = tau*lambda recovered from r0 = tau/(2-z)
            const Complex z = 2.0 - tau_ / lv.r0[j];
            const Complex kf = constants.eps0 * chi_hat(model, z / tau_);
            const Complex rm = lv.r0[j] * (1.0 + lv.g[j]) * std::pow(lv.g[j], double(m - 1));
            acc += lv.quadw[j] * kf * rm;
        }
        return acc.imag() / pi;
    }

    /// Closed-form trapezoidal CQ weight of a Debye model at lag m >= 1.
    static double exact_weight(const MaterialModel& model, const PhysicalConstants& constants,
                               double tau, long m) {
        double w = 0.0;
        for (const DebyePole& p : model.poles) {
            const double r = p.tau_relax / tau;
            const double a = 1.0 + 2.0 * r;
            const double b = 1.0 - 2.0 * r;
            w += constants.eps0 * p.delta_eps * 4.0 * r / (a * a) *
                 std::pow(-b / a, static_cast<double>(m - 1));
        }
        return w;
    }

    /// Setup-time diagnostic: sampled weight error per level over its lag
    /// window, accumulated as an output-error bound (window width times max
    /// sampled error, summed over levels) relative to eps0*chi_hat(0).
    void estimate_accuracy(const MaterialLayout& layout, const PhysicalConstants& constants) {
        double scale = 0.0;
        for (const MaterialModel& m : layout.materials) {
            if (m.dispersive()) scale = std::max(scale, constants.eps0 * chi_hat(m, 0.0).real());
        }
        if (scale == 0.0) return;
        const long lag_cap = 1L << 17;
        double bound = 0.0;
        for (const Level& lv : levels_) {
            const long m_lo = std::max<long>(lv.block_len, 1);
            const long m_hi = std::min((2L * params_.base + 1L) * lv.block_len, lag_cap);
            if (m_lo > m_hi) continue;
            double max_err = 0.0;
            for (int s = 0; s < 8; ++s) {
                const double frac = static_cast<double>(s) / 7.0;
                const long m = m_lo + static_cast<long>(frac * static_cast<double>(m_hi - m_lo));
                for (const MaterialModel& mat : layout.materials) {
                    if (!mat.dispersive()) continue;
                    const double approx = level_weight(lv, mat, constants, m);
                    const double exact = exact_weight(mat, constants, tau_, m);
                    max_err = std::max(max_err, std::abs(approx - exact));
                }
            }
            bound += static_cast<double>(m_hi - m_lo + 1) * max_err;
        }
        accuracy_estimate_ = bound / scale;
        accuracy_degraded_ = accuracy_estimate_ > params_.tolerance;
    }

    FocqParams params_;
    double tau_ = 0.0;
    Eigen::Index n_nodes_ = 0;
    int lev0_ = 0;
    long head_len_ = 0;
    RegionWeights head_weights_;
    std::map<long, Eigen::VectorXd> head_;
    std::vector<Level> levels_;
    long n_ = -1;
    bool accuracy_degraded_ = false;
    double accuracy_estimate_ = 0.0;
};

}  // namespace maxcq

#endif
