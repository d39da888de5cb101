#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "avoidance/approx.hpp"
#include "avoidance/constants.hpp"
#include "avoidance/errors.hpp"
#include "avoidance/functionals.hpp"
#include "avoidance/gof.hpp"
#include "avoidance/malliavin.hpp"
#include "avoidance/moments.hpp"
#include "avoidance/parallel.hpp"
#include "avoidance/ppp.hpp"

namespace avoidance {

/// Shortest decimal string that round-trips the double (17 significant
/// digits at most).
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, ptr);
}

inline nlohmann::json mc_to_json(const McEstimate& e) {
  return {{"value", e.value}, {"se", e.se}, {"n", e.n}};
}

/// Configuration of one experiment run; mirrors the CLI flags and the
/// snake_case JSON config file.
struct ExperimentConfig {
  std::string model = "germ-grain";  // germ-grain | quantization
  std::string process = "poisson";   // poisson | binomial
  int dim = 1;
  double radius = 0.5;    // germ-grain
  double exponent = 1.0;  // quantization
  std::vector<double> scales = {50, 200, 800};
  std::uint64_t reps = 5000;
  std::uint64_t pilot_reps = 50000;
  std::uint64_t quad_budget = 100000;
  std::uint64_t constant_budget = 20000;
  std::uint64_t master_seed = 1;
  int workers = 0;  // 0: env var / hardware default
  std::string quad_method = "auto";  // auto | exact | monte-carlo | lattice
  std::string output_path;

  ModelSpec to_model() const {
    ModelSpec m = model == "quantization"
                      ? ModelSpec::quantization(dim, exponent)
                      : ModelSpec::germ_grain(dim, radius);
    if (process == "binomial") {
      if (m.kind == ModelKind::Quantization)
        throw std::invalid_argument("binomial sampling supports germ-grain only");
      m.process = ProcessKind::Binomial;
    } else if (process != "poisson") {
      throw std::invalid_argument("unknown process: " + process);
    }
    return m;
  }

  QuadratureSpec to_quad() const {
    QuadratureSpec q;
    q.budget = quad_budget;
    if (quad_method == "exact" || (quad_method == "auto" && dim == 1))
      q.method = QuadMethod::Exact;
    else if (quad_method == "lattice")
      q.method = QuadMethod::Lattice;
    else
      q.method = QuadMethod::MonteCarlo;
    return q;
  }

  void validate_for_distances() const {
    if (reps < 100)
      throw std::invalid_argument(
          "reps must be >= 100 for distance experiments");
    for (std::size_t i = 1; i < scales.size(); ++i)
      if (!(scales[i] > scales[i - 1]))
        throw std::invalid_argument("scales must be strictly increasing");
  }

  nlohmann::json to_json() const {
    return {{"model", model},
            {"process", process},
            {"dim", dim},
            {"radius", radius},
            {"exponent", exponent},
            {"scales", scales},
            {"reps", reps},
            {"pilot_reps", pilot_reps},
            {"quad_budget", quad_budget},
            {"constant_budget", constant_budget},
            {"master_seed", master_seed},
            {"workers", workers},
            {"quad_method", quad_method},
            {"output_path", output_path}};
  }

  static ExperimentConfig from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("model", c.model);
    get("process", c.process);
    get("dim", c.dim);
    get("radius", c.radius);
    get("exponent", c.exponent);
    get("scales", c.scales);
    get("reps", c.reps);
    get("pilot_reps", c.pilot_reps);
    get("quad_budget", c.quad_budget);
    get("constant_budget", c.constant_budget);
    get("master_seed", c.master_seed);
    get("workers", c.workers);
    get("quad_method", c.quad_method);
    get("output_path", c.output_path);
    return c;
  }
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t pilot_seed(std::uint64_t master_seed) {
  return mix64(master_seed ^ 0x70696c6f74736564ULL);
}

}  // namespace detail

/// Reproducibility record: config echo, content hash, per-stage seeds.
/// Deliberately excludes timing so reruns are byte-identical.
inline nlohmann::json run_manifest(const ExperimentConfig& cfg) {
  const std::string echo = cfg.to_json().dump();
  return {{"config", cfg.to_json()},
          {"config_hash", detail::fnv1a(echo)},
          {"seeds",
           {{"replicates", cfg.master_seed},
            {"pilot", detail::pilot_seed(cfg.master_seed)},
            {"constants", cfg.master_seed}}}};
}

/// `sample-ppp`: CSV header `dim,seed`, one row of coordinates per point.
inline void write_ppp_csv(std::ostream& os, const PointPattern& p,
                          std::uint64_t seed) {
  os << "dim," << "seed\n" << p.dim << "," << seed << "\n";
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto pt = p.point(i);
    for (int k = 0; k < p.dim; ++k) {
      if (k) os << ",";
      os << format_double(pt[k]);
    }
    os << "\n";
  }
}

/// `simulate`: CSV `replicate,value`.
inline void write_replicates_csv(std::ostream& os,
                                 const std::vector<double>& values) {
  os << "replicate,value\n";
  for (std::size_t i = 0; i < values.size(); ++i)
    os << i << "," << format_double(values[i]) << "\n";
}

struct CltResult {
  std::vector<DistanceRow> rows;
  RateFit fit_w{};
  RateFit fit_k{};
};

/// One scale of a clt-check run: replicate, standardize with analytic mean
/// (Poisson models) or pilot mean (binomial), pilot variance, then exact
/// distances to the standard normal and theorem bounds.
inline CltResult run_clt_check(const ExperimentConfig& cfg) {
  cfg.validate_for_distances();
  const ModelSpec model = cfg.to_model();
  const QuadratureSpec quad = cfg.to_quad();
  const unsigned workers = resolve_workers(cfg.workers);
  CltResult out;
  for (double scale : cfg.scales) {
    const std::vector<double> pilot =
        replicate_functional(model, scale, cfg.pilot_reps,
                             detail::pilot_seed(cfg.master_seed), quad, workers);
    const Standardization pilot_moments = empirical_moments(pilot);
    Standardization st;
    st.sd = pilot_moments.sd;
    st.mean = model.process == ProcessKind::Poisson
                  ? closed_form_mean(model, scale)
                  : pilot_moments.mean;

    std::vector<double> values = replicate_functional(
        model, scale, cfg.reps, cfg.master_seed, quad, workers);
    std::vector<double> z = standardize(values, st);
    std::sort(z.begin(), z.end());

    DistanceRow row;
    row.scale = scale;
    row.reps = cfg.reps;
    row.d_w = wasserstein1_distance(z);
    row.d_k = kolmogorov_distance(z);
    if (model.process == ProcessKind::Binomial) {
      row.bound_w = std::numeric_limits<double>::quiet_NaN();
      row.bound_k = std::numeric_limits<double>::quiet_NaN();
    } else if (model.kind == ModelKind::GermGrain) {
      row.bound_w = explicit_germ_constant(model.dim, model.shapes.fixed_radius,
                                           scale) /
                    std::sqrt(scale);
      RngStream cs(cfg.master_seed, 7001);
      const McEstimate c1 =
          c1_lambda(model, scale, cfg.constant_budget, cs, workers);
      RngStream sa(cfg.master_seed, 7002), sb(cfg.master_seed, 7003),
          sc(cfg.master_seed, 7004), sd(cfg.master_seed, 7005),
          se(cfg.master_seed, 7006);
      row.bound_k = kolmogorov_bound(
          c1.value,
          c2_constant(C2Kind::A, model, cfg.constant_budget, sa, workers).value,
          c2_constant(C2Kind::B, model, cfg.constant_budget, sb, workers).value,
          c2_constant(C2Kind::C, model, cfg.constant_budget, sc, workers).value,
          c2_constant(C2Kind::D, model, cfg.constant_budget, sd, workers).value,
          c2_constant(C2Kind::E, model, cfg.constant_budget, se, workers).value,
          scale);
    } else {
      RngStream cs(cfg.master_seed, 7001);
      const McEstimate c1 =
          c1_lambda(model, scale, cfg.constant_budget, cs, workers);
      RngStream sa(cfg.master_seed, 7002), sb(cfg.master_seed, 7003),
          sc(cfg.master_seed, 7004), sd(cfg.master_seed, 7005),
          se(cfg.master_seed, 7006);
      const double c2a =
          c2_constant(C2Kind::A, model, cfg.constant_budget, sa, workers).value;
      const double c2b =
          c2_constant(C2Kind::B, model, cfg.constant_budget, sb, workers).value;
      const double c2c =
          c2_constant(C2Kind::C, model, cfg.constant_budget, sc, workers).value;
      const double c2d =
          c2_constant(C2Kind::D, model, cfg.constant_budget, sd, workers).value;
      const double c2e =
          c2_constant(C2Kind::E, model, cfg.constant_budget, se, workers).value;
      row.bound_w = wasserstein_bound_clean(c1.value, c2b, c2c, scale);
      row.bound_k =
          kolmogorov_bound(c1.value, c2a, c2b, c2c, c2d, c2e, scale);
    }
    out.rows.push_back(row);
  }
  std::vector<double> xs, ws, ks;
  for (const DistanceRow& r : out.rows) {
    xs.push_back(r.scale);
    ws.push_back(r.d_w);
    ks.push_back(r.d_k);
  }
  out.fit_w = rate_fit(xs, ws);
  out.fit_k = rate_fit(xs, ks);
  return out;
}

inline void write_distance_csv(std::ostream& os, const CltResult& res,
                               std::uint64_t seed) {
  os << "scale,d_w,d_k,bound_w,bound_k,reps,seed\n";
  for (const DistanceRow& r : res.rows) {
    os << format_double(r.scale) << "," << format_double(r.d_w) << ","
       << format_double(r.d_k) << "," << format_double(r.bound_w) << ","
       << format_double(r.bound_k) << "," << r.reps << "," << seed << "\n";
  }
  os << "# rate_fit_w slope=" << format_double(res.fit_w.slope)
     << " intercept=" << format_double(res.fit_w.intercept) << "\n";
  os << "# rate_fit_k slope=" << format_double(res.fit_k.slope)
     << " intercept=" << format_double(res.fit_k.intercept) << "\n";
}

inline nlohmann::json constants_report_json(const ConstantsReport& rep) {
  nlohmann::json j;
  j["model"] = rep.model_name;
  j["lambda"] = rep.lambda;
  j["c1_lambda"] = mc_to_json(rep.c1_lam);
  j["c1_limit"] = mc_to_json(rep.c1_lim);
  for (const auto& [name, est] : rep.c2)
    j[std::string("c2_") + name] = mc_to_json(est);
  j["d1"] = rep.d1_valid ? mc_to_json(rep.d1) : nlohmann::json("skipped");
  j["alpha_n"] =
      rep.alpha_valid ? mc_to_json(rep.alpha) : nlohmann::json("skipped");
  j["bound_wasserstein"] = rep.bound_wasserstein;
  j["bound_kolmogorov"] = rep.bound_kolmogorov;
  return j;
}

/// One pass/fail record of a verification suite.
struct VerifyRecord {
  std::string name;
  bool pass = false;
  nlohmann::json detail;
};

inline std::vector<VerifyRecord> verify_approx_suite() {
  std::vector<VerifyRecord> records;
  std::size_t idx = 0;
  for (const InequalityCheck& c : appendix_grid()) {
    VerifyRecord r;
    r.name = "appendix-" + std::to_string(idx++);
    r.pass = c.pass();
    r.detail = {{"params", c.params},
                {"lhs", c.lhs},
                {"rhs", c.rhs},
                {"margin", c.margin()},
                {"pass", c.pass()}};
    records.push_back(std::move(r));
  }
  return records;
}

inline std::vector<VerifyRecord> verify_moments_suite(std::uint64_t seed) {
  std::vector<VerifyRecord> records;
  auto add = [&](const std::string& name, bool pass, nlohmann::json detail) {
    detail["pass"] = pass;
    records.push_back({name, pass, std::move(detail)});
  };
  const double r1 = std::pow(0.5, 1.0);  // interval of length 1 in d=1
  const std::uint64_t reps = 100000;
  // Equal, disjoint and nested ball pairs at unit mass scale.
  struct Case {
    const char* name;
    Ball A, B;
  } cases[] = {
      {"moment-equal", {{0.0}, r1}, {{0.0}, r1}},
      {"moment-disjoint", {{0.0}, r1}, {{3.0}, r1}},
      {"moment-nested", {{0.0}, 0.25}, {{0.0}, r1}},
  };
  std::uint64_t salt = 0;
  for (const Case& c : cases) {
    RngStream s(seed, ++salt);
    const MomentCheck chk = mc_check_moment(c.A, c.B, 1.0, reps, s);
    const double tol = 3.0 * std::max(chk.mc.se, 1e-12);
    add(c.name, std::fabs(chk.mc.value - chk.closed) <= tol,
        {{"mc", chk.mc.value},
         {"se", chk.mc.se},
         {"closed", chk.closed}});
  }
  // Random four-ball covariance configurations against the product bound.
  RngStream gen(seed, 999);
  for (int cfg_i = 0; cfg_i < 20; ++cfg_i) {
    Ball balls[4];
    for (Ball& b : balls) {
      b.center = {gen.uniform(-1.0, 1.0)};
      b.radius = gen.uniform(0.1, 0.6);
    }
    RngStream s(seed, 2000 + cfg_i);
    const CovarianceCheck chk = mc_check_covariance(
        balls[0], balls[1], balls[2], balls[3], 1.0, 20000, s);
    add("covariance-" + std::to_string(cfg_i),
        chk.mc_cov.value <= chk.bound + 4.0 * chk.mc_cov.se,
        {{"cov", chk.mc_cov.value},
         {"se", chk.mc_cov.se},
         {"bound", chk.bound}});
  }
  return records;
}

inline std::vector<VerifyRecord> verify_malliavin_suite(std::uint64_t seed) {
  std::vector<VerifyRecord> records;
  auto add = [&](const std::string& name, bool pass, nlohmann::json detail) {
    detail["pass"] = pass;
    records.push_back({name, pass, std::move(detail)});
  };
  // Closed-form vs pathwise difference operator on random patterns.
  const ModelSpec model = ModelSpec::germ_grain(1, 0.5);
  const double lambda = 100.0;
  const double r = model.shapes.fixed_radius * model.shrink(lambda);
  QuadratureSpec quad{QuadMethod::MonteCarlo, 20000};
  double max_diff = 0.0;
  for (int i = 0; i < 50; ++i) {
    RngStream rep(seed, 100 + i);
    RngStream prng = rep.fork(1);
    PointPattern pattern =
        sample_homogeneous(model.domain.inflated(r), lambda, prng);
    GridIndex index(pattern);
    RngStream zr = rep.fork(2);
    std::vector<double> z = {zr.uniform(-r, 1.0 + r)};
    RngStream q1 = rep.fork(3), q2 = rep.fork(4);
    const double closed =
        difference_operator(model, pattern, index, z, lambda, quad, q1);
    const double pathwise = difference_operator_pathwise(
        model, pattern, z, lambda, {QuadMethod::Exact, 0}, q2);
    max_diff = std::max(max_diff, std::fabs(closed - pathwise));
  }
  // The pathwise value uses the exact 1-d sweep, so the tolerance only has
  // to cover the closed-form Monte Carlo noise (the integrand lives on an
  // interval of length 2r).
  const double tol = 4.0 * 2.0 * r / std::sqrt(static_cast<double>(quad.budget));
  add("difference-closed-vs-pathwise", max_diff <= tol,
      {{"max_abs_diff", max_diff}, {"tol", tol}});

  // Mehler integral bounds and monotonicity on a grid.
  bool mehler_ok = true;
  for (std::uint64_t k = 0; k <= 12 && mehler_ok; ++k)
    for (double a : {0.0, 0.3, 1.0, 2.5, 7.0}) {
      const double v = mehler_integral(k, a);
      const double kd = static_cast<double>(k);
      if (!(v <= 1.0 / (kd + 1.0) + 1e-12) ||
          !(v >= std::exp(-a) / (kd + 1.0) - 1e-12))
        mehler_ok = false;
      if (k > 0 && !(v < mehler_integral(k - 1, a) + 1e-15)) mehler_ok = false;
      if (a > 0.0 && !(v < mehler_integral(k, a - 0.25) + 1e-15))
        mehler_ok = false;
    }
  add("mehler-bounds-monotonicity", mehler_ok, {});
  return records;
}

}  // namespace avoidance
