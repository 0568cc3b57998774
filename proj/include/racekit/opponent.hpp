#pragma once

#include <json.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "racekit/gp.hpp"

namespace racekit {

struct OpponentObservation {
  double s = 0.0;    // m, on the observing car's racing line
  double d = 0.0;    // m
  double v_s = 0.0;  // m/s
  double t = 0.0;    // s, observation timestamp
};

// Per-bin streaming aggregates (Welford) for lateral offset and speed.
struct BinStats {
  int count = 0;
  double mean_d = 0.0, m2_d = 0.0;
  double mean_vs = 0.0, m2_vs = 0.0;

  void add(double d, double vs) {
    ++count;
    double dd = d - mean_d;
    mean_d += dd / count;
    m2_d += dd * (d - mean_d);
    double dv = vs - mean_vs;
    mean_vs += dv / count;
    m2_vs += dv * (vs - mean_vs);
  }
  double var_d() const { return count > 1 ? m2_d / (count - 1) : 0.0; }
  double var_vs() const { return count > 1 ? m2_vs / (count - 1) : 0.0; }
};

struct BinnedData {
  double bin_width = 0.1;
  double lap_length = 0.0;
  std::vector<BinStats> bins;

  size_t filled() const {
    size_t c = 0;
    for (const auto& b : bins)
      if (b.count > 0) ++c;
    return c;
  }
  double coverage() const {
    return bins.empty() ? 0.0
                        : static_cast<double>(filled()) / bins.size();
  }
  double bin_center(size_t k) const {
    return (static_cast<double>(k) + 0.5) * bin_width;
  }
};

// Bin index k = floor(s/delta); s is wrapped into [0, lap_length) first.
inline BinnedData bin_observations(const std::vector<OpponentObservation>& obs,
                                   double delta, double lap_length) {
  if (obs.empty())
    throw std::invalid_argument("bin_observations: empty observation list");
  if (!(delta > 0.0) || !(lap_length > delta))
    throw std::invalid_argument("bin_observations: bad bin width or lap");
  BinnedData out;
  out.bin_width = delta;
  out.lap_length = lap_length;
  out.bins.resize(static_cast<size_t>(std::ceil(lap_length / delta)));
  for (const auto& o : obs) {
    if (!std::isfinite(o.s) || !std::isfinite(o.d) || !std::isfinite(o.v_s))
      throw std::invalid_argument("bin_observations: non-finite observation");
    double s = std::fmod(o.s, lap_length);
    if (s < 0.0) s += lap_length;
    size_t k = std::min(static_cast<size_t>(s / delta), out.bins.size() - 1);
    out.bins[k].add(o.d, o.v_s);
  }
  return out;
}

struct GpFitConfig {
  double min_coverage = 0.6;
  std::vector<double> length_scales = {1.0, 2.5, 6.0, 12.0};
  std::vector<double> noise_vars = {1e-4, 1e-3, 1e-2, 5e-2};
};

// Pair of fitted GPs over the lap: lateral offset d(s) with a Matern 5/2
// kernel, longitudinal speed v_s(s) with an RBF kernel. Immutable once
// fitted; per-lap refits build a new instance.
class OpponentTrajectoryGP {
 public:
  static OpponentTrajectoryGP fit(const BinnedData& binned,
                                  const GpFitConfig& cfg = {}) {
    if (binned.bins.empty() || !(binned.lap_length > 0.0))
      throw std::invalid_argument("gp fit: empty binned data");
    if (binned.coverage() < cfg.min_coverage)
      throw std::invalid_argument(
          "gp fit: insufficient lap coverage (need >= 60% of bins)");
    std::vector<double> s, d, vs;
    for (size_t k = 0; k < binned.bins.size(); ++k) {
      if (binned.bins[k].count == 0) continue;
      s.push_back(binned.bin_center(k));
      d.push_back(binned.bins[k].mean_d);
      vs.push_back(binned.bins[k].mean_vs);
    }
    Eigen::Map<Eigen::VectorXd> sm(s.data(), static_cast<Eigen::Index>(s.size()));
    Eigen::Map<Eigen::VectorXd> dm(d.data(), static_cast<Eigen::Index>(d.size()));
    Eigen::Map<Eigen::VectorXd> vm(vs.data(), static_cast<Eigen::Index>(vs.size()));
    OpponentTrajectoryGP out;
    out.lap_length_ = binned.lap_length;
    out.gp_d_ = fit_gp_grid(KernelType::Matern52, binned.lap_length, sm, dm,
                            cfg.length_scales, cfg.noise_vars);
    out.gp_vs_ = fit_gp_grid(KernelType::Rbf, binned.lap_length, sm, vm,
                             cfg.length_scales, cfg.noise_vars);
    return out;
  }

  std::pair<double, double> predict_d(double s) const {
    return {gp_d_.mean(s), std::sqrt(gp_d_.predictive_var(s))};
  }
  std::pair<double, double> predict_vs(double s) const {
    return {gp_vs_.mean(s), std::sqrt(gp_vs_.predictive_var(s))};
  }

  // True iff the observation sits inside the k-sigma band of both GPs
  // (closed bound).
  bool consistency_check(const OpponentObservation& o, double k_sigma) const {
    auto [md, sd] = predict_d(o.s);
    auto [mv, sv] = predict_vs(o.s);
    return std::abs(o.d - md) <= k_sigma * sd &&
           std::abs(o.v_s - mv) <= k_sigma * sv;
  }

  double lap_length() const { return lap_length_; }
  const PeriodicGp& gp_d() const { return gp_d_; }
  const PeriodicGp& gp_vs() const { return gp_vs_; }

  nlohmann::json to_json() const {
    auto dump_gp = [](const PeriodicGp& g) {
      nlohmann::json j;
      j["kernel"] = g.kernel() == KernelType::Matern52 ? "matern52" : "rbf";
      j["length_scale"] = g.hyper().length_scale;
      j["signal_var"] = g.hyper().signal_var;
      j["noise_var"] = g.hyper().noise_var;
      j["period"] = g.period();
      j["train_s"] = std::vector<double>(
          g.inputs().data(), g.inputs().data() + g.inputs().size());
      j["train_y"] = std::vector<double>(
          g.targets().data(), g.targets().data() + g.targets().size());
      return j;
    };
    nlohmann::json j;
    j["lap_length"] = lap_length_;
    j["gp_d"] = dump_gp(gp_d_);
    j["gp_vs"] = dump_gp(gp_vs_);
    return j;
  }

  static OpponentTrajectoryGP from_json(const nlohmann::json& j) {
    auto load_gp = [](const nlohmann::json& g) {
      KernelType kt = g.at("kernel").get<std::string>() == "matern52"
                          ? KernelType::Matern52
                          : KernelType::Rbf;
      GpHyper h{g.at("length_scale").get<double>(),
                g.at("signal_var").get<double>(),
                g.at("noise_var").get<double>()};
      std::vector<double> s = g.at("train_s").get<std::vector<double>>();
      std::vector<double> y = g.at("train_y").get<std::vector<double>>();
      Eigen::Map<Eigen::VectorXd> sm(s.data(),
                                     static_cast<Eigen::Index>(s.size()));
      Eigen::Map<Eigen::VectorXd> ym(y.data(),
                                     static_cast<Eigen::Index>(y.size()));
      return PeriodicGp(kt, h, g.at("period").get<double>(), sm, ym);
    };
    OpponentTrajectoryGP out;
    out.lap_length_ = j.at("lap_length").get<double>();
    out.gp_d_ = load_gp(j.at("gp_d"));
    out.gp_vs_ = load_gp(j.at("gp_vs"));
    return out;
  }

 private:
  double lap_length_ = 0.0;
  PeriodicGp gp_d_, gp_vs_;
};

// Dense periodic sampling of a fitted opponent model. Exact GP queries pay
// a triangular solve per point, far too slow for the propagation and
// planning loops that evaluate thousands per cycle; this trades them for
// wrapped linear interpolation on a fine grid, built once per refit.
class SampledOpponentModel {
 public:
  SampledOpponentModel() = default;

  explicit SampledOpponentModel(const OpponentTrajectoryGP& gp,
                                double step = 0.05)
      : lap_(gp.lap_length()) {
    if (!(lap_ > 0.0))
      throw std::invalid_argument("sampled model: GP is not fitted");
    n_ = std::max<size_t>(8, static_cast<size_t>(std::lround(lap_ / step)));
    h_ = lap_ / static_cast<double>(n_);
    mean_d_.resize(n_);
    std_d_.resize(n_);
    mean_vs_.resize(n_);
    std_vs_.resize(n_);
    for (size_t k = 0; k < n_; ++k) {
      double s = static_cast<double>(k) * h_;
      auto [md, sd] = gp.predict_d(s);
      auto [mv, sv] = gp.predict_vs(s);
      mean_d_[k] = md;
      std_d_[k] = sd;
      mean_vs_[k] = mv;
      std_vs_[k] = sv;
    }
  }

  std::pair<double, double> predict_d(double s) const {
    return {lerp(mean_d_, s), lerp(std_d_, s)};
  }
  std::pair<double, double> predict_vs(double s) const {
    return {lerp(mean_vs_, s), lerp(std_vs_, s)};
  }
  double lap_length() const { return lap_; }
  bool ready() const { return n_ > 0; }

 private:
  double lerp(const std::vector<double>& v, double s) const {
    double u = std::fmod(s, lap_);
    if (u < 0.0) u += lap_;
    double g = u / h_;
    size_t k = std::min(static_cast<size_t>(g), n_ - 1);
    double f = g - static_cast<double>(k);
    size_t k1 = (k + 1) % n_;
    return v[k] + f * (v[k1] - v[k]);
  }

  double lap_ = 0.0, h_ = 0.0;
  size_t n_ = 0;
  std::vector<double> mean_d_, std_d_, mean_vs_, std_vs_;
};

inline OpponentTrajectoryGP fit(const BinnedData& binned,
                                const GpFitConfig& cfg = {}) {
  return OpponentTrajectoryGP::fit(binned, cfg);
}

inline std::pair<double, double> predict_d(const OpponentTrajectoryGP& gp,
                                           double s) {
  return gp.predict_d(s);
}
inline std::pair<double, double> predict_vs(const OpponentTrajectoryGP& gp,
                                            double s) {
  return gp.predict_vs(s);
}
inline bool consistency_check(const OpponentTrajectoryGP& gp,
                              const OpponentObservation& o, double k_sigma) {
  return gp.consistency_check(o, k_sigma);
}

}  // namespace racekit
