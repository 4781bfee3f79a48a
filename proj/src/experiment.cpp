#include "catpose/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <map>
#include <numbers>
#include <set>

#include <json.hpp>

#include "catpose/errors.hpp"
#include "catpose/metrics.hpp"
#include "catpose/random.hpp"
#include "catpose/similarity.hpp"

namespace catpose {

using nlohmann::ordered_json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

// -- config parsing ----------------------------------------------------------

void check_keys(const ordered_json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
  if (!obj.is_object()) throw ValidationError("config: '" + where + "' must be an object");
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.contains(k)) {
      throw ValidationError("config: unknown key '" + (where.empty() ? k : where + "." + k) + "'");
    }
  }
}

template <class T>
void read(const ordered_json& obj, const char* key, const std::string& where, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("config: bad value for '" + (where.empty() ? std::string(key) : where + "." + key) + "'");
  }
}

Vec3 read_vec3(const ordered_json& obj, const char* key, const std::string& where, Vec3 fallback) {
  std::vector<double> v;
  read(obj, key, where, v);
  if (!obj.contains(key)) return fallback;
  if (v.size() != 3) throw ValidationError("config: '" + where + "." + key + "' needs 3 numbers");
  return {v[0], v[1], v[2]};
}

ordered_json vec3_json(const Vec3& v) { return ordered_json::array({v.x(), v.y(), v.z()}); }

std::string sampler_name(PoseSampler s) { return s == PoseSampler::Upright ? "upright" : "uniform"; }

PoseSampler sampler_from(const std::string& s) {
  if (s == "upright") return PoseSampler::Upright;
  if (s == "uniform") return PoseSampler::Uniform;
  throw ValidationError("config: unknown value '" + s + "' for 'generation.sampler'");
}

LossWeights weights_from(const ordered_json& w, const std::string& where) {
  check_keys(w, {"pose", "shape_prior", "mask", "reconstruction", "consistency"}, where);
  LossWeights out;
  read(w, "pose", where, out.pose);
  read(w, "shape_prior", where, out.shape_prior);
  read(w, "mask", where, out.mask);
  read(w, "reconstruction", where, out.reconstruction);
  read(w, "consistency", where, out.consistency);
  return out;
}

ordered_json weights_json(const LossWeights& w) {
  return {{"pose", w.pose},
          {"shape_prior", w.shape_prior},
          {"mask", w.mask},
          {"reconstruction", w.reconstruction},
          {"consistency", w.consistency}};
}

ordered_json fit_config_json(const FitConfig& c) {
  const auto& t = c.toggles;
  return {{"max_steps", c.max_steps},
          {"step_size", c.step_size},
          {"init_scheme", c.init_scheme},
          {"fit_points", c.fit_points},
          {"weights", weights_json(c.weights)},
          {"shape_prior_weights",
           {{"coordinate", c.shape_prior.coordinate},
            {"shape", c.shape_prior.shape},
            {"deformation", c.shape_prior.deformation},
            {"matching", c.shape_prior.matching}}},
          {"toggles",
           {{"direct", t.direct},
            {"prior", t.prior},
            {"sym_losses", t.sym_losses},
            {"sym_recon", t.sym_recon},
            {"outlier_removal", t.outlier_removal}}},
          {"outlier_threshold", c.outlier_threshold},
          {"warmup_fraction", c.warmup_fraction},
          {"relabel_interval", c.relabel_interval},
          {"affinity", c.affinity},
          {"rigid_fraction", c.rigid_fraction},
          {"monotone", c.monotone},
          {"ransac",
           {{"max_iterations", c.ransac.max_iterations},
            {"inlier_threshold", c.ransac.inlier_threshold}}}};
}

ordered_json config_json(const ExperimentConfig& c) {
  const auto& g = c.generation;
  const auto& io = g.instance;
  ordered_json fit = ordered_json::object();
  if (c.fit.max_steps) fit["max_steps"] = *c.fit.max_steps;
  if (c.fit.init_scheme) fit["init_scheme"] = *c.fit.init_scheme;
  if (c.fit.fit_points) fit["fit_points"] = *c.fit.fit_points;
  if (c.fit.step_size) fit["step_size"] = *c.fit.step_size;
  if (c.fit.weights) fit["weights"] = weights_json(*c.fit.weights);
  return {{"seed", c.seed},
          {"generation",
           {{"categories", g.categories},
            {"count", g.count},
            {"points", io.points},
            {"noise_sigma", io.noise_sigma},
            {"outlier_fraction", io.outlier_fraction},
            {"sampler", sampler_name(io.sampler)},
            {"max_tilt_deg", io.max_tilt / kDeg},
            {"translation_lo", vec3_json(io.translation_lo)},
            {"translation_hi", vec3_json(io.translation_hi)},
            {"prior_population", g.prior_population},
            {"prior_points", g.prior_points}}},
          {"preset", c.preset},
          {"fit", fit},
          {"solve",
           {{"max_iterations", c.solve.max_iterations},
            {"inlier_threshold", c.solve.inlier_threshold}}},
          {"on_divergence", c.on_divergence},
          {"jobs", c.jobs}};
}

// -- results ----------------------------------------------------------------

ordered_json pose_json(const Pose9& p) {
  ordered_json r = ordered_json::array();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r.push_back(p.rotation(i, j));
  }
  return {{"rotation", r}, {"translation", vec3_json(p.translation)}, {"size", vec3_json(p.size)}};
}

Pose9 pose_from_json(const ordered_json& j) {
  try {
    const auto r = j.at("rotation").get<std::vector<double>>();
    const auto t = j.at("translation").get<std::vector<double>>();
    const auto s = j.at("size").get<std::vector<double>>();
    if (r.size() != 9 || t.size() != 3 || s.size() != 3) throw ValidationError("results: bad pose shape");
    Pose9 p;
    for (int i = 0; i < 9; ++i) p.rotation(i / 3, i % 3) = r[i];
    p.translation = {t[0], t[1], t[2]};
    p.size = {s[0], s[1], s[2]};
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("results: malformed pose: ") + e.what());
  }
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Outcome {
  bool ok = false;
  Pose9 pose;
  PoseError error;
  ordered_json extra = ordered_json::object();
  std::string message;
  int exit_code = 0;
  bool divergence = false;
};

template <class Solve>
CommandSummary run_instances(const ExperimentConfig& cfg, const std::filesystem::path& bundle_dir,
                             const std::filesystem::path& out, const std::string& mode,
                             const ordered_json& resolved, Solve&& solve) {
  validate_experiment(cfg);
  const Bundle bundle = read_bundle(bundle_dir);
  const int n = static_cast<int>(bundle.instances.size());
  std::vector<Outcome> outcomes(n);

#pragma omp parallel for schedule(dynamic) num_threads(cfg.jobs)
  for (int k = 0; k < n; ++k) {
    const auto& bi = bundle.instances[k];
    Outcome& o = outcomes[k];
    try {
      const CategoryProfile& prof = bundle.profile(bi.instance.category);
      o.pose = solve(bi.instance, prof, o.extra);
      o.error = pose_error(o.pose, bi.instance.pose_gt, prof.symmetry);
      o.ok = true;
    } catch (const Error& e) {
      o.message = e.what();
      o.exit_code = e.exit_code();
      o.divergence = dynamic_cast<const NumericalError*>(&e) != nullptr;
    } catch (const std::exception& e) {
      o.message = e.what();
      o.exit_code = 3;
    }
  }

  for (int k = 0; k < n; ++k) {
    const Outcome& o = outcomes[k];
    if (o.ok || (o.divergence && cfg.on_divergence == "skip")) continue;
    const std::string msg = "instance " + bundle.instances[k].id + ": " + o.message;
    if (o.exit_code == 1) throw ValidationError(msg);
    if (o.exit_code == 2) throw IoError(msg);
    throw NumericalError(msg);
  }

  ordered_json per = ordered_json::array();
  std::vector<double> rot, trans;
  CommandSummary sum;
  sum.instances = n;
  for (int k = 0; k < n; ++k) {
    const auto& bi = bundle.instances[k];
    const Outcome& o = outcomes[k];
    ordered_json row = {{"id", bi.id}, {"category", bi.instance.category}, {"seed", bi.instance.seed}};
    if (o.ok) {
      row["status"] = "ok";
      row["pose"] = pose_json(o.pose);
      row["rotation_error_deg"] = o.error.rotation_error;
      row["translation_error_m"] = o.error.translation_error;
      row["iou3d"] = o.error.iou3d;
      for (const auto& [key, v] : o.extra.items()) row[key] = v;
      rot.push_back(o.error.rotation_error);
      trans.push_back(o.error.translation_error);
    } else {
      row["status"] = "failed";
      row["error"] = o.message;
      ++sum.failed;
    }
    per.push_back(std::move(row));
  }
  sum.median_rotation_error = median(rot);
  sum.median_translation_error = median(trans);

  ordered_json doc = {{"config", config_json(cfg)},
                      {"resolved", resolved},
                      {"mode", mode},
                      {"per_instance", per},
                      {"summary",
                       {{"instances", sum.instances},
                        {"failed", sum.failed},
                        {"median_rotation_error_deg", sum.median_rotation_error},
                        {"median_translation_error_m", sum.median_translation_error}}}};
  write_text(out, doc.dump(2) + "\n");
  return sum;
}

std::string csv_number(double v) { return std::isfinite(v) ? format_double(v) : ""; }

}  // namespace

void validate_experiment(const ExperimentConfig& cfg) {
  const auto& g = cfg.generation;
  if (g.categories.empty()) throw ValidationError("config: 'generation.categories' is empty");
  std::set<std::string> seen;
  for (const auto& c : g.categories) {
    const auto& known = builtin_categories();
    if (std::find(known.begin(), known.end(), c) == known.end()) {
      throw ValidationError("config: 'generation.categories' has unknown category '" + c + "'");
    }
    if (!seen.insert(c).second) {
      throw ValidationError("config: 'generation.categories' repeats '" + c + "'");
    }
  }
  if (g.count < 1) throw ValidationError("config: 'generation.count' must be at least 1");
  if (g.prior_population < 1) throw ValidationError("config: 'generation.prior_population' must be at least 1");
  if (g.prior_points < 1) throw ValidationError("config: 'generation.prior_points' must be at least 1");
  validate_instance_options(g.instance);
  resolved_fit_config(cfg);
  validate_ransac_config(cfg.solve);
  if (cfg.on_divergence != "fail" && cfg.on_divergence != "skip") {
    throw ValidationError("config: 'on_divergence' must be \"fail\" or \"skip\"");
  }
  if (cfg.jobs < 1) throw ValidationError("config: 'jobs' must be at least 1");
}

ExperimentConfig parse_experiment(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig c;
  check_keys(j, {"seed", "generation", "preset", "fit", "solve", "on_divergence", "jobs"}, "");
  read(j, "seed", "", c.seed);
  read(j, "preset", "", c.preset);
  read(j, "on_divergence", "", c.on_divergence);
  read(j, "jobs", "", c.jobs);
  if (j.contains("generation")) {
    const auto& g = j["generation"];
    const std::string w = "generation";
    check_keys(g, {"categories", "count", "points", "noise_sigma", "outlier_fraction", "sampler",
                   "max_tilt_deg", "translation_lo", "translation_hi", "prior_population",
                   "prior_points"},
               w);
    auto& G = c.generation;
    read(g, "categories", w, G.categories);
    read(g, "count", w, G.count);
    read(g, "points", w, G.instance.points);
    read(g, "noise_sigma", w, G.instance.noise_sigma);
    read(g, "outlier_fraction", w, G.instance.outlier_fraction);
    if (g.contains("sampler")) {
      std::string s;
      read(g, "sampler", w, s);
      G.instance.sampler = sampler_from(s);
    }
    double tilt = G.instance.max_tilt / kDeg;
    read(g, "max_tilt_deg", w, tilt);
    G.instance.max_tilt = tilt * kDeg;
    G.instance.translation_lo = read_vec3(g, "translation_lo", w, G.instance.translation_lo);
    G.instance.translation_hi = read_vec3(g, "translation_hi", w, G.instance.translation_hi);
    read(g, "prior_population", w, G.prior_population);
    read(g, "prior_points", w, G.prior_points);
  }
  if (j.contains("fit")) {
    const auto& f = j["fit"];
    check_keys(f, {"max_steps", "init_scheme", "fit_points", "step_size", "weights"}, "fit");
    auto take = [&](const char* key, auto& opt) {
      if (!f.contains(key)) return;
      typename std::remove_reference_t<decltype(opt)>::value_type v{};
      read(f, key, "fit", v);
      opt = v;
    };
    take("max_steps", c.fit.max_steps);
    take("init_scheme", c.fit.init_scheme);
    take("fit_points", c.fit.fit_points);
    take("step_size", c.fit.step_size);
    if (f.contains("weights")) c.fit.weights = weights_from(f["weights"], "fit.weights");
  }
  if (j.contains("solve")) {
    const auto& s = j["solve"];
    check_keys(s, {"max_iterations", "inlier_threshold"}, "solve");
    read(s, "max_iterations", "solve", c.solve.max_iterations);
    read(s, "inlier_threshold", "solve", c.solve.inlier_threshold);
  }
  validate_experiment(c);
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  return parse_experiment(read_text(path));
}

std::string experiment_json(const ExperimentConfig& cfg) { return config_json(cfg).dump(2) + "\n"; }

FitConfig resolved_fit_config(const ExperimentConfig& cfg) {
  FitConfig f = preset_config(cfg.preset);
  if (cfg.fit.max_steps) f.max_steps = *cfg.fit.max_steps;
  if (cfg.fit.init_scheme) f.init_scheme = *cfg.fit.init_scheme;
  if (cfg.fit.fit_points) f.fit_points = *cfg.fit.fit_points;
  if (cfg.fit.step_size) f.step_size = *cfg.fit.step_size;
  if (cfg.fit.weights) f.weights = *cfg.fit.weights;
  validate_fit_config(f);
  return f;
}

Bundle generate_bundle(const ExperimentConfig& cfg) {
  validate_experiment(cfg);
  const auto& g = cfg.generation;
  const int ncat = static_cast<int>(g.categories.size());
  Bundle b;
  b.profiles.resize(ncat);
  b.instances.resize(static_cast<std::size_t>(ncat) * g.count);

#pragma omp parallel for schedule(dynamic) num_threads(cfg.jobs)
  for (int c = 0; c < ncat; ++c) {
    const ShapeSpec spec = builtin_spec(g.categories[c]);
    b.profiles[c] = make_prior(spec, g.prior_population, g.prior_points,
                               derive_seed(cfg.seed, 0x100000000ULL + c));
    for (int k = 0; k < g.count; ++k) {
      const std::size_t idx = static_cast<std::size_t>(c) * g.count + k;
      auto& bi = b.instances[idx];
      char id[64];
      std::snprintf(id, sizeof(id), "%s-%04d", g.categories[c].c_str(), k);
      bi.id = id;
      bi.instance = make_instance(spec, g.instance, derive_seed(cfg.seed, idx));
    }
  }
  return b;
}

void cmd_gen(const ExperimentConfig& cfg, const std::filesystem::path& out) {
  const Bundle b = generate_bundle(cfg);
  write_bundle(out, b);
  write_text(out / "config.json", experiment_json(cfg));
}

CommandSummary cmd_fit(const ExperimentConfig& cfg, const std::filesystem::path& bundle,
                       const std::filesystem::path& out) {
  const FitConfig base = resolved_fit_config(cfg);
  const std::string mode = base.toggles.direct ? "direct" : "two-stage";
  return run_instances(cfg, bundle, out, mode, fit_config_json(base),
                       [&](const Instance& inst, const CategoryProfile& prof, ordered_json& extra) {
                         FitConfig fc = base;
                         fc.seed = derive_seed(cfg.seed, inst.seed);
                         const FitResult r = fit(inst, prof, fc);
                         extra["final_loss"] = r.final_loss;
                         extra["steps"] = r.steps;
                         extra["best_start"] = r.best_start;
                         extra["inliers"] = r.mask.count();
                         return r.pose;
                       });
}

CommandSummary cmd_solve(const ExperimentConfig& cfg, const std::filesystem::path& bundle,
                         const std::filesystem::path& out) {
  const ordered_json resolved = {{"max_iterations", cfg.solve.max_iterations},
                                 {"inlier_threshold", cfg.solve.inlier_threshold}};
  return run_instances(cfg, bundle, out, "solve", resolved,
                       [&](const Instance& inst, const CategoryProfile&, ordered_json& extra) {
                         RansacConfig rc = cfg.solve;
                         rc.seed = derive_seed(cfg.seed, inst.seed);
                         const auto r = pose_from_nocs_detailed(inst.coords_gt, inst.observed, rc);
                         extra["inliers"] = std::count(r.inliers.begin(), r.inliers.end(), true);
                         return r.pose;
                       });
}

MetricsReport cmd_eval(const std::filesystem::path& results, const std::filesystem::path& bundle_dir,
                       const std::filesystem::path& out) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(read_text(results));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(results.string() + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("per_instance") || !doc["per_instance"].is_array()) {
    throw ValidationError(results.string() + ": missing 'per_instance'");
  }
  const Bundle bundle = read_bundle(bundle_dir);

  std::map<std::string, const ordered_json*> by_id;
  for (const auto& row : doc["per_instance"]) {
    if (!row.contains("id") || !row["id"].is_string()) throw ValidationError("results: row without id");
    const std::string id = row["id"].get<std::string>();
    if (!by_id.emplace(id, &row).second) throw ValidationError("identifier mismatch: duplicate id '" + id + "'");
  }
  for (const auto& bi : bundle.instances) {
    if (!by_id.contains(bi.id)) throw ValidationError("identifier mismatch: no result for '" + bi.id + "'");
  }
  if (by_id.size() != bundle.instances.size()) {
    for (const auto& [id, row] : by_id) {
      const bool known = std::any_of(bundle.instances.begin(), bundle.instances.end(),
                                     [&](const BundleInstance& b) { return b.id == id; });
      if (!known) throw ValidationError("identifier mismatch: '" + id + "' is not in the bundle");
    }
  }

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<PoseError> errors;
  std::vector<std::string> cats;
  std::vector<bool> ok;
  for (const auto& bi : bundle.instances) {
    const ordered_json& row = *by_id.at(bi.id);
    if (row.value("category", bi.instance.category) != bi.instance.category) {
      throw ValidationError("identifier mismatch: '" + bi.id + "' has a different category");
    }
    const bool good = row.value("status", "ok") == "ok";
    PoseError e{180.0, inf, 0.0};  // a failed instance misses every bucket
    if (good) {
      if (!row.contains("pose")) throw ValidationError("results: '" + bi.id + "' has no pose");
      e = pose_error(pose_from_json(row["pose"]), bi.instance.pose_gt,
                     bundle.profile(bi.instance.category).symmetry);
    }
    errors.push_back(e);
    cats.push_back(bi.instance.category);
    ok.push_back(good);
  }
  const MetricsReport rep = aggregate(errors, cats);

  ordered_json per = ordered_json::array();
  std::string csv = "id,category,status,rotation_error_deg,translation_error_m,iou3d\n";
  std::vector<double> rot, trans;
  for (std::size_t k = 0; k < errors.size(); ++k) {
    const auto& e = errors[k];
    const std::string& id = bundle.instances[k].id;
    ordered_json row = {{"id", id}, {"category", cats[k]}, {"status", ok[k] ? "ok" : "failed"}};
    if (ok[k]) {
      row["rotation_error_deg"] = e.rotation_error;
      row["translation_error_m"] = e.translation_error;
      row["iou3d"] = e.iou3d;
      rot.push_back(e.rotation_error);
      trans.push_back(e.translation_error);
    } else {
      row["rotation_error_deg"] = nullptr;
      row["translation_error_m"] = nullptr;
      row["iou3d"] = nullptr;
    }
    per.push_back(row);
    csv += id + "," + cats[k] + "," + (ok[k] ? "ok" : "failed") + ",";
    csv += ok[k] ? csv_number(e.rotation_error) + "," + csv_number(e.translation_error) + "," +
                       csv_number(e.iou3d)
                 : std::string(",,");
    csv += "\n";
  }

  ordered_json summary = ordered_json::object();
  summary["count"] = rep.overall.count;
  summary["failed"] = static_cast<int>(std::count(ok.begin(), ok.end(), false));
  summary["median_rotation_error_deg"] = median(rot);
  summary["median_translation_error_m"] = median(trans);
  for (const auto& [name, v] : precision_fields(rep.overall)) summary[name] = v;
  for (const auto& [cat, p] : rep.per_category) {
    for (const auto& [name, v] : precision_fields(p)) summary[cat + "/" + name] = v;
  }

  ordered_json report = {{"config", doc.value("config", ordered_json::object())},
                         {"resolved", doc.value("resolved", ordered_json::object())},
                         {"mode", doc.value("mode", "")},
                         {"per_instance", per},
                         {"summary", summary}};
  write_text(out / "metrics.json", report.dump(2) + "\n");
  write_text(out / "metrics.csv", csv);
  return rep;
}

bool cmd_gradcheck(const GradcheckOptions& opt, const std::filesystem::path& out) {
  if (opt.trials < 1) throw ValidationError("gradcheck: trials must be at least 1");
  const auto rows = run_gradcheck(opt);
  bool all = true;
  std::printf("%-16s %8s %14s  %s\n", "term", "trials", "max_rel_error", "result");
  ordered_json arr = ordered_json::array();
  for (const auto& r : rows) {
    std::printf("%-16s %8d %14.3e  %s\n", r.term.c_str(), r.trials, r.max_rel_error,
                r.pass ? "pass" : "FAIL");
    all = all && r.pass;
    arr.push_back({{"term", r.term}, {"trials", r.trials}, {"max_rel_error", r.max_rel_error},
                   {"pass", r.pass}});
  }
  if (!out.empty()) {
    const ordered_json doc = {{"config",
                               {{"seed", opt.seed},
                                {"trials", opt.trials},
                                {"tolerance", opt.tolerance},
                                {"fault_term", opt.fault_term}}},
                              {"per_term", arr},
                              {"summary", {{"pass", all}}}};
    write_text(out, doc.dump(2) + "\n");
  }
  return all;
}

}  // namespace catpose
