#include "capita/calibration.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "capita/rng.hpp"
#include "capita/stats.hpp"

namespace capita {

namespace {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

constexpr double kRankTolerance = 1e-10;

// Substream purposes.
constexpr std::uint32_t kRansacStream = 0x52414e53;   // "RANS"
constexpr std::uint32_t kTheilSenStream = 0x54534e4e; // "TSNN"
constexpr std::uint32_t kSplitStream = 0x53504c54;    // "SPLT"

Vec4 row_x(const DesignRow& r) { return Vec4(r.x_low, r.x_med, r.x_high, r.x_inflow); }

struct Solved {
  Vec4 beta;
  double condition_number;
};

/// Weighted normal equations with Jacobi scaling. `weights` may be empty (all 1).
Solved solve_normal(std::span<const DesignRow> rows, std::span<const double> weights) {
  Mat4 n = Mat4::Zero();
  Vec4 rhs = Vec4::Zero();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    const Vec4 x = row_x(rows[i]);
    n.noalias() += w * x * x.transpose();
    rhs.noalias() += w * rows[i].y * x;
  }
  Vec4 d = n.diagonal();
  for (int j = 0; j < 4; ++j)
    if (!(d[j] > 0))
      throw CapitaError(ErrorKind::RankDeficient, "design column " + std::to_string(j) + " is identically zero");
  const Vec4 inv_sqrt = d.cwiseSqrt().cwiseInverse();
  const Mat4 scaled = inv_sqrt.asDiagonal() * n * inv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Mat4> eig(scaled, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff(), hi = eig.eigenvalues().maxCoeff();
  if (!(lo > kRankTolerance * hi))
    throw CapitaError(ErrorKind::RankDeficient, "normal matrix is singular (relative eigenvalue " +
                                                    std::to_string(lo / hi) + ")");
  Eigen::LLT<Mat4> llt(scaled);
  if (llt.info() != Eigen::Success) throw CapitaError(ErrorKind::RankDeficient, "normal matrix is not positive definite");
  const Vec4 z = llt.solve(inv_sqrt.cwiseProduct(rhs));

  Eigen::SelfAdjointEigenSolver<Mat4> raw(n, Eigen::EigenvaluesOnly);
  const double rlo = raw.eigenvalues().minCoeff(), rhi = raw.eigenvalues().maxCoeff();
  return Solved{inv_sqrt.cwiseProduct(z), rlo > 0 ? rhi / rlo : std::numeric_limits<double>::infinity()};
}

/// Exact solve of four rows; nullopt when the 4×4 system is singular.
std::optional<Vec4> solve_exact(const DesignRow* const* four) {
  Mat4 a;
  Vec4 y;
  for (int i = 0; i < 4; ++i) {
    a.row(i) = row_x(*four[i]).transpose();
    y[i] = four[i]->y;
  }
  Vec4 scale = a.cwiseAbs().colwise().maxCoeff().transpose();
  for (int j = 0; j < 4; ++j)
    if (!(scale[j] > 0)) return std::nullopt;
  const Mat4 as = a * scale.cwiseInverse().asDiagonal();
  Eigen::FullPivLU<Mat4> lu(as);
  lu.setThreshold(kRankTolerance);
  if (!lu.isInvertible()) return std::nullopt;
  return scale.cwiseInverse().cwiseProduct(lu.solve(y));
}

std::array<double, 4> to_array(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }

std::vector<double> residuals(std::span<const DesignRow> rows, const Vec4& beta) {
  std::vector<double> r(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) r[i] = rows[i].y - row_x(rows[i]).dot(beta);
  return r;
}

double mad(std::span<const double> r) {
  const double med = stats::median(r);
  std::vector<double> dev(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) dev[i] = std::abs(r[i] - med);
  return stats::median(dev);
}

void attach_diagnostics(CapitationParams& p, std::span<const DesignRow> rows, double condition_number) {
  const Vec4 beta(p.a_low, p.a_med, p.a_high, p.b);
  std::vector<double> ys;
  ys.reserve(rows.size());
  for (const auto& r : rows) ys.push_back(r.y);
  const double ybar = stats::mean(ys);
  double ss_res = 0, ss_tot = 0;
  p.diagnostics.pct_deviation.clear();
  for (const auto& r : rows) {
    const double pred = row_x(r).dot(beta);
    ss_res += (r.y - pred) * (r.y - pred);
    ss_tot += (r.y - ybar) * (r.y - ybar);
    p.diagnostics.pct_deviation.push_back(r.y != 0 ? (pred - r.y) / r.y : 0.0);
  }
  p.diagnostics.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  p.diagnostics.condition_number = condition_number;
  const char* names[] = {"a_low", "a_med", "a_high", "b"};
  const auto v = p.vector();
  for (int j = 0; j < 4; ++j) {
    if (!std::isfinite(v[j]))
      throw CapitaError(ErrorKind::RankDeficient, std::string("parameter ") + names[j] + " is not finite");
    if (v[j] <= 0) p.findings.push_back(Finding{"NonPositiveParameter", names[j], std::to_string(v[j])});
  }
}

CapitationParams make_params(const Vec4& beta, FitMethod method) {
  CapitationParams p;
  p.set_vector(to_array(beta));
  p.method = method;
  return p;
}

CapitationParams fit_huber(std::span<const DesignRow> rows, const RobustOptions& o) {
  Solved s = solve_normal(rows, {});
  Vec4 beta = s.beta;
  double ymax = 0;
  for (const auto& r : rows) ymax = std::max(ymax, std::abs(r.y));
  std::vector<double> w(rows.size(), 1.0);
  int it = 0;
  bool converged = false;
  for (; it < o.huber_max_iter; ++it) {
    const auto r = residuals(rows, beta);
    const double scale = mad(r) / 0.6745;
    if (!(scale > 1e-12 * (1.0 + ymax))) {  // exact fit: nothing to reweight
      converged = true;
      break;
    }
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double z = std::abs(r[i]) / scale;
      w[i] = z <= o.huber_k ? 1.0 : o.huber_k / z;
    }
    s = solve_normal(rows, w);
    const Vec4 step = s.beta - beta;
    beta = s.beta;
    double rel = 0;
    for (int j = 0; j < 4; ++j) rel = std::max(rel, std::abs(step[j]) / std::max(std::abs(beta[j]), 1.0));
    if (rel < o.huber_tol) {
      converged = true;
      ++it;
      break;
    }
  }
  if (!converged)
    throw CapitaError(ErrorKind::NonConvergence,
                      "Huber IRLS did not converge in " + std::to_string(o.huber_max_iter) + " iterations");
  CapitationParams p = make_params(beta, FitMethod::Huber);
  attach_diagnostics(p, rows, s.condition_number);
  p.diagnostics.iterations = it;
  return p;
}

CapitationParams fit_ransac(std::span<const DesignRow> rows, std::uint64_t seed, const RobustOptions& o) {
  const Solved ols = solve_normal(rows, {});
  const auto r0 = residuals(rows, ols.beta);
  double ymax = 0;
  for (const auto& r : rows) ymax = std::max(ymax, std::abs(r.y));
  const double threshold = std::max(o.ransac_mad_multiple * mad(r0), 1e-9 * ymax);

  const std::size_t n = rows.size();
  std::vector<std::size_t> best;
  double best_spread = 0;
  std::vector<std::size_t> inliers;
  for (int iter = 0; iter < o.ransac_iterations; ++iter) {
    Philox rng(seed, stream_id(kRansacStream, static_cast<std::uint32_t>(iter)));
    std::array<std::size_t, 4> pick{};
    for (int k = 0; k < 4; ++k) {
      bool fresh;
      do {
        pick[k] = static_cast<std::size_t>(rng.below(n));
        fresh = std::find(pick.begin(), pick.begin() + k, pick[k]) == pick.begin() + k;
      } while (!fresh);
    }
    const DesignRow* four[4] = {&rows[pick[0]], &rows[pick[1]], &rows[pick[2]], &rows[pick[3]]};
    const auto beta = solve_exact(four);
    if (!beta) continue;
    inliers.clear();
    double spread = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = std::abs(rows[i].y - row_x(rows[i]).dot(*beta));
      if (e <= threshold) {
        inliers.push_back(i);
        spread += e;
      }
    }
    if (inliers.size() > best.size() || (inliers.size() == best.size() && !best.empty() && spread < best_spread)) {
      best = inliers;
      best_spread = spread;
    }
  }
  if (best.size() < o.ransac_min_consensus)
    throw CapitaError(ErrorKind::NoConsensus, "RANSAC consensus set has " + std::to_string(best.size()) +
                                                  " rows (< " + std::to_string(o.ransac_min_consensus) + ")");
  std::vector<DesignRow> consensus;
  consensus.reserve(best.size());
  for (auto i : best) consensus.push_back(rows[i]);
  const Solved fin = solve_normal(consensus, {});
  CapitationParams p = make_params(fin.beta, FitMethod::RANSAC);
  attach_diagnostics(p, rows, fin.condition_number);
  p.diagnostics.inliers = best.size();
  return p;
}

CapitationParams fit_theil_sen(std::span<const DesignRow> rows, std::uint64_t seed, const RobustOptions& o) {
  const Solved ols = solve_normal(rows, {});  // rank check and condition number
  const std::size_t n = rows.size();
  std::array<std::vector<double>, 4> coords;
  const int max_attempts = o.theilsen_samples * 20;
  for (int attempt = 0; attempt < max_attempts && static_cast<int>(coords[0].size()) < o.theilsen_samples;
       ++attempt) {
    Philox rng(seed, stream_id(kTheilSenStream, static_cast<std::uint32_t>(attempt)));
    std::array<std::size_t, 4> pick{};
    for (int k = 0; k < 4; ++k) {
      bool fresh;
      do {
        pick[k] = static_cast<std::size_t>(rng.below(n));
        fresh = std::find(pick.begin(), pick.begin() + k, pick[k]) == pick.begin() + k;
      } while (!fresh);
    }
    const DesignRow* four[4] = {&rows[pick[0]], &rows[pick[1]], &rows[pick[2]], &rows[pick[3]]};
    if (auto beta = solve_exact(four))
      for (int j = 0; j < 4; ++j) coords[j].push_back((*beta)[j]);
  }
  if (coords[0].empty()) throw CapitaError(ErrorKind::RankDeficient, "no non-singular 4-row sample found");
  Vec4 beta;
  for (int j = 0; j < 4; ++j) beta[j] = stats::median(coords[j]);
  CapitationParams p = make_params(beta, FitMethod::TheilSen);
  attach_diagnostics(p, rows, ols.condition_number);
  p.diagnostics.samples = coords[0].size();
  return p;
}

}  // namespace

std::string_view to_string(FitMethod m) {
  switch (m) {
    case FitMethod::OLS: return "ols";
    case FitMethod::Huber: return "huber";
    case FitMethod::RANSAC: return "ransac";
    case FitMethod::TheilSen: return "theilsen";
  }
  return "?";
}

std::optional<FitMethod> parse_fit_method(std::string_view s) {
  if (s == "ols") return FitMethod::OLS;
  if (s == "huber") return FitMethod::Huber;
  if (s == "ransac") return FitMethod::RANSAC;
  if (s == "theilsen") return FitMethod::TheilSen;
  return std::nullopt;
}

std::vector<DesignRow> build_design(std::span<const FacilityMetrics> metrics, const SegmentationResult& seg,
                                    Findings* findings) {
  std::vector<DesignRow> rows;
  std::size_t covered = 0;
  for (const auto& m : metrics) {
    if (seg.contains(m.facility_id)) ++covered;
    if (m.months_active == 0) {
      if (findings) findings->push_back(Finding{"NoActivity", m.facility_id, "excluded from design"});
      continue;
    }
    DesignRow r;
    r.facility_id = m.facility_id;
    r.y = m.annualized_cost.rwf();
    r.x_inflow = m.inflow;
    if (m.member_count > 0) {
      auto tier = seg.tier.find(m.facility_id);
      if (tier == seg.tier.end())
        throw CapitaError(ErrorKind::InconsistentCoverage, "facility " + m.facility_id + " has members but no segment");
      const double um = lookup_U(m.facility_id, seg) * static_cast<double>(m.member_count);
      switch (tier->second) {
        case Tier::Low: r.x_low = um; break;
        case Tier::Medium: r.x_med = um; break;
        case Tier::High: r.x_high = um; break;
      }
    }
    rows.push_back(std::move(r));
  }
  if (covered != seg.capture_group.size())
    throw CapitaError(ErrorKind::InconsistentCoverage, "segmentation covers facilities absent from the metrics");
  return rows;
}

CapitationParams fit_ols(std::span<const DesignRow> rows) {
  if (rows.size() < 4) throw CapitaError(ErrorKind::RankDeficient, "need at least 4 rows to fit 4 parameters");
  const Solved s = solve_normal(rows, {});
  CapitationParams p = make_params(s.beta, FitMethod::OLS);
  attach_diagnostics(p, rows, s.condition_number);
  return p;
}

CapitationParams fit_robust(std::span<const DesignRow> rows, FitMethod method, std::uint64_t seed,
                            const RobustOptions& options) {
  if (rows.size() < 4) throw CapitaError(ErrorKind::RankDeficient, "need at least 4 rows to fit 4 parameters");
  switch (method) {
    case FitMethod::OLS: return fit_ols(rows);
    case FitMethod::Huber: return fit_huber(rows, options);
    case FitMethod::RANSAC: return fit_ransac(rows, seed, options);
    case FitMethod::TheilSen: return fit_theil_sen(rows, seed, options);
  }
  throw CapitaError(ErrorKind::InvalidArgument, "unknown fit method");
}

CapitationParams calibrate(std::span<const FacilityMetrics> metrics, const SegmentationResult& seg,
                           const Period& period, FitMethod method, std::uint64_t seed) {
  Findings design_findings;
  const auto rows = build_design(metrics, seg, &design_findings);
  CapitationParams p = fit_robust(rows, method, seed);
  p.calibration_period = period;
  p.tiers = seg.tier;
  p.capture_groups = seg.capture_group;
  p.group_median_u = seg.group_median_u;
  p.findings.insert(p.findings.begin(), design_findings.begin(), design_findings.end());
  return p;
}

std::pair<std::size_t, std::size_t> over_under(const std::array<double, 4>& params, std::span<const DesignRow> rows,
                                               double tolerance) {
  std::size_t over = 0, under = 0;
  for (const auto& r : rows) {
    const double pred = params[0] * r.x_low + params[1] * r.x_med + params[2] * r.x_high + params[3] * r.x_inflow;
    if (pred > r.y * (1.0 + tolerance)) ++over;
    if (pred < r.y * (1.0 - tolerance)) ++under;
  }
  return {over, under};
}

RobustnessReport robustness_harness(std::span<const DesignRow> rows, int n_splits, double train_fraction,
                                    std::uint64_t seed, double tolerance, FitMethod method) {
  if (rows.size() < 20)
    throw CapitaError(ErrorKind::InvalidArgument, "robustness harness needs at least 20 rows");
  if (n_splits < 1) throw CapitaError(ErrorKind::InvalidArgument, "n_splits must be positive");
  RobustnessReport rep;
  rep.n_splits = static_cast<std::size_t>(n_splits);
  rep.train_fraction = train_fraction;
  rep.tolerance = tolerance;
  rep.seed = seed;
  rep.method = method;

  const std::size_t n = rows.size();
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::vector<DesignRow> train, test;
  for (int s = 0; s < n_splits; ++s) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Philox rng(seed, stream_id(kSplitStream, static_cast<std::uint32_t>(s)));
    rng.shuffle(order);
    train.clear();
    test.clear();
    for (std::size_t k = 0; k < n; ++k) (k < n_train ? train : test).push_back(rows[order[k]]);
    const CapitationParams p = fit_robust(train, method, seed ^ static_cast<std::uint64_t>(s));
    SplitOutcome out;
    out.params = p.vector();
    out.test_rows = test.size();
    std::tie(out.overpaid, out.underpaid) = over_under(out.params, test, tolerance);
    rep.splits.push_back(out);
  }

  for (int j = 0; j < 4; ++j) {
    std::vector<double> v;
    v.reserve(rep.splits.size());
    for (const auto& s : rep.splits) v.push_back(s.params[j]);
    rep.mean[j] = stats::mean(v);
    rep.sd[j] = stats::stddev(v);
    rep.min[j] = *std::min_element(v.begin(), v.end());
    rep.max[j] = *std::max_element(v.begin(), v.end());
  }
  rep.full_fit = fit_robust(rows, method, seed).vector();
  std::tie(rep.mean_model_overpaid, rep.mean_model_underpaid) = over_under(rep.mean, rows, tolerance);
  return rep;
}

}  // namespace capita
