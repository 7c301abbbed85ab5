#include "gibbsbound/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace gibbs {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Typed access to a key/value map that remembers which keys were read.
class Reader {
 public:
  explicit Reader(const KeyValues& kv) : kv_(kv) {}

  std::optional<std::string> get(const std::string& key) {
    used_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return std::nullopt;
    return it->second;
  }

  std::string str(const std::string& key, const std::string& fallback) {
    return get(key).value_or(fallback);
  }

  double real(const std::string& key, double fallback) {
    auto v = get(key);
    if (!v) return fallback;
    try {
      std::size_t pos = 0;
      const double d = std::stod(*v, &pos);
      if (pos != v->size()) throw std::invalid_argument("");
      return d;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "' expects a number, got '" + *v + "'");
    }
  }

  std::uint64_t integer(const std::string& key, std::uint64_t fallback) {
    auto v = get(key);
    if (!v) return fallback;
    try {
      std::size_t pos = 0;
      const auto i = std::stoull(*v, &pos);
      if (pos != v->size() || v->front() == '-') throw std::invalid_argument("");
      return i;
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "' expects a nonnegative integer, got '" + *v + "'");
    }
  }

  bool boolean(const std::string& key, bool fallback) {
    auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
    throw ConfigError("key '" + key + "' expects a boolean, got '" + *v + "'");
  }

  void reject_unknown() const {
    for (const auto& [k, v] : kv_)
      if (!used_.contains(k)) throw ConfigError("unknown config key '" + k + "'");
  }

 private:
  const KeyValues& kv_;
  std::set<std::string> used_;
};

template <typename F>
auto config_guard(const std::string& what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

std::string list_to_string(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

std::string paths_to_string(const std::vector<fs::path>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i].string();
  return s;
}

json optional_to_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::optional<double> optional_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

std::ofstream open_out(const fs::path& path) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_chain_files(const ChainRecord& rec, const json& summary, const fs::path& stem) {
  {
    auto out = open_out(fs::path(stem.string() + ".csv"));
    const bool heldout = !rec.heldout_zero_one.empty();
    out << "step,full_loss,zero_one" << (heldout ? ",heldout_zero_one" : "") << '\n';
    for (std::size_t i = 0; i < rec.steps.size(); ++i) {
      out << rec.steps[i] << ',' << format_double(rec.loss[i]) << ','
          << format_double(rec.zero_one[i]);
      if (heldout) out << ',' << format_double(rec.heldout_zero_one[i]);
      out << '\n';
    }
  }
  auto out = open_out(fs::path(stem.string() + ".json"));
  out << summary.dump(2) << '\n';
}

struct LoadedData {
  LabeledDataset train;
  std::optional<LabeledDataset> test;
};

LoadedData load_data(const ExperimentConfig& cfg) {
  const auto& src = cfg.data;
  LoadedData out;
  auto finish = [&](LabeledDataset raw, std::size_t keep) {
    if (!src.positive_classes)
      throw ConfigError("positive_classes is required for idx/cifar datasets");
    return take_prefix(binarize(raw, BinarizationRule(*src.positive_classes)), keep ? keep : raw.size());
  };
  switch (src.kind) {
    case DatasetKind::Synthetic: {
      out.train = make_synthetic(src.synthetic, derive_seed(cfg.seed, 0x73796e74));
      if (src.synthetic_test_n > 0) {
        SyntheticSpec test_spec = src.synthetic;
        test_spec.n = src.synthetic_test_n;
        out.test = make_synthetic(test_spec, derive_seed(cfg.seed, 0x74657374));
      }
      break;
    }
    case DatasetKind::Idx: {
      out.train = finish(load_idx_files(src.idx_images, src.idx_labels), src.subsample);
      if (!src.idx_test_images.empty())
        out.test = finish(load_idx_files(src.idx_test_images, src.idx_test_labels),
                          src.test_subsample);
      break;
    }
    case DatasetKind::Cifar: {
      out.train = finish(load_cifar_files(src.cifar_files), src.subsample);
      if (!src.cifar_test_files.empty())
        out.test = finish(load_cifar_files(src.cifar_test_files), src.test_subsample);
      break;
    }
  }
  if (out.train.input_dim() != cfg.arch.input_dim())
    throw ConfigError("arch input width " + std::to_string(cfg.arch.input_dim()) +
                      " does not match the dataset width " +
                      std::to_string(out.train.input_dim()));
  return out;
}

// Runs tasks 0..count-1 on `jobs` threads.
void run_pool(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& task) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        task(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, trim(line.substr(eq + 1))).second)
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return kv;
}

KeyValues load_key_values(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_key_values(buf.str());
}

ExperimentConfig ExperimentConfig::from_key_values(const KeyValues& kv) {
  Reader r(kv);
  ExperimentConfig cfg;

  const std::string dataset = r.str("dataset", "synthetic");
  if (dataset == "synthetic")
    cfg.data.kind = DatasetKind::Synthetic;
  else if (dataset == "idx" || dataset == "mnist")
    cfg.data.kind = DatasetKind::Idx;
  else if (dataset == "cifar" || dataset == "cifar10")
    cfg.data.kind = DatasetKind::Cifar;
  else
    throw ConfigError("unknown dataset '" + dataset + "'");

  cfg.data.synthetic.n = r.integer("synthetic.n", cfg.data.synthetic.n);
  cfg.data.synthetic.input_dim = r.integer("synthetic.d_in", cfg.data.synthetic.input_dim);
  cfg.data.synthetic.separation = r.real("synthetic.separation", cfg.data.synthetic.separation);
  cfg.data.synthetic.flip_rate = r.real("synthetic.flip_rate", cfg.data.synthetic.flip_rate);
  cfg.data.synthetic_test_n = r.integer("synthetic.test_n", 0);
  cfg.data.idx_images = r.str("idx.images", "");
  cfg.data.idx_labels = r.str("idx.labels", "");
  cfg.data.idx_test_images = r.str("idx.test_images", "");
  cfg.data.idx_test_labels = r.str("idx.test_labels", "");
  for (const auto& f : split_list(r.str("cifar.files", ""))) cfg.data.cifar_files.push_back(f);
  for (const auto& f : split_list(r.str("cifar.test_files", "")))
    cfg.data.cifar_test_files.push_back(f);
  if (auto pc = r.get("positive_classes")) {
    std::set<int> classes;
    for (const auto& c : split_list(*pc)) {
      try {
        classes.insert(std::stoi(c));
      } catch (const std::exception&) {
        throw ConfigError("bad class index '" + c + "' in positive_classes");
      }
    }
    cfg.data.positive_classes = classes;
  } else if (cfg.data.kind == DatasetKind::Idx) {
    cfg.data.positive_classes = BinarizationRule::mnist_low_digits().positive_classes();
  } else if (cfg.data.kind == DatasetKind::Cifar) {
    cfg.data.positive_classes = BinarizationRule::cifar_vehicles().positive_classes();
  }
  cfg.data.subsample = r.integer("subsample", 0);
  cfg.data.test_subsample = r.integer("test_subsample", 0);

  cfg.arch = config_guard("arch", [&] { return Architecture::parse(r.str("arch", "20,32,1")); });
  cfg.loss.kind = config_guard("loss", [&] { return parse_loss_kind(r.str("loss", "bbce")); });
  cfg.loss.p_min = r.real("p_min", cfg.loss.p_min);
  cfg.loss.threshold = r.real("theta", cfg.loss.threshold);
  config_guard("loss", [&] { cfg.loss.validate(); return 0; });

  cfg.sampler.method =
      config_guard("method", [&] { return parse_sampler_method(r.str("method", "sgld")); });
  cfg.sampler.step = r.real("step", cfg.sampler.step);
  cfg.sampler.prior_width = r.real("prior_width", cfg.sampler.prior_width);
  const std::string mb = r.str("minibatch", "auto");
  if (mb == "auto") {
    cfg.minibatch_auto = true;
  } else {
    cfg.minibatch_auto = false;
    cfg.sampler.minibatch_size = r.integer("minibatch", 1);
  }
  cfg.sampler.max_steps = r.integer("max_steps", cfg.sampler.max_steps);
  cfg.sampler.record_every = r.integer("record_every", 1);
  if (const std::string w = r.str("init_width", "prior"); w != "prior") {
    cfg.sampler.init_width = r.real("init_width", 1.0);
    if (!(*cfg.sampler.init_width > 0.0)) throw ConfigError("init_width must be positive");
  }
  if (!(cfg.sampler.step > 0.0)) throw ConfigError("step must be positive");
  if (!(cfg.sampler.prior_width > 0.0)) throw ConfigError("prior_width must be positive");
  if (cfg.sampler.record_every < 1) throw ConfigError("record_every must be >= 1");

  cfg.stop.min_steps = r.integer("min_steps", cfg.stop.min_steps);
  cfg.stop.epsilon = r.real("stop_epsilon", cfg.stop.epsilon);
  config_guard("stopping rule", [&] { cfg.stop.validate(); return 0; });
  cfg.ergodic.alpha_stop = r.real("alpha_stop", cfg.ergodic.alpha_stop);
  cfg.ergodic.alpha_erg = r.real("alpha_erg", cfg.ergodic.alpha_erg);
  for (double a : {cfg.ergodic.alpha_stop, cfg.ergodic.alpha_erg})
    if (!(a > 0.0 && a <= 1.0)) throw ConfigError("filter alphas must lie in (0, 1]");
  if (const std::string f = r.str("filter", "auto"); f != "auto")
    cfg.ergodic.form = config_guard("filter", [&] { return parse_filter_form(f); });

  if (auto ladder = r.get("ladder"))
    cfg.ladder = config_guard("ladder", [&] { return TemperatureLadder::parse(*ladder); });
  cfg.delta = r.real("delta", cfg.delta);
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  cfg.seed = r.integer("seed", 0);
  cfg.out_dir = r.str("out_dir", cfg.out_dir.string());

  const std::string labels = r.str("labels", "both");
  if (labels == "both")
    cfg.labels = LabelsMode::Both;
  else if (labels == "true")
    cfg.labels = LabelsMode::True;
  else if (labels == "random")
    cfg.labels = LabelsMode::Random;
  else
    throw ConfigError("labels must be true, random or both");

  cfg.warm_start = r.boolean("warm_start", false);
  cfg.single_draw = r.boolean("single_draw", true);
  cfg.uncalibrated = r.boolean("uncalibrated", false);
  if (r.get("r")) {
    cfg.fixed_r = r.real("r", 1.0);
    if (!(*cfg.fixed_r >= 0.0)) throw ConfigError("r must be nonnegative");
  }

  const std::string penalties = r.str("penalties", "off");
  const double loss_bound = r.real("penalty.loss_bound", 1.0);
  const double proxy_bound = r.real("penalty.proxy_bound", 1.0);
  const std::string eps = r.str("penalty.epsilon", "0");
  if (penalties != "off") {
    StabilityInputs inp;
    inp.mode = config_guard("penalties", [&] { return parse_penalty_mode(penalties); });
    inp.loss_bound = loss_bound;
    inp.proxy_bound = proxy_bound;
    for (const auto& e : split_list(eps)) inp.epsilon.push_back(std::stod(e));
    if (inp.epsilon.size() == 1) inp.epsilon.assign(cfg.ladder.size(), inp.epsilon[0]);
    if (inp.epsilon.size() != cfg.ladder.size())
      throw ConfigError("penalty.epsilon needs one value or one per rung");
    cfg.penalties = inp;
  }

  const std::string reading = r.str("gamma_reading", "posterior_mean");
  if (reading == "posterior_mean")
    cfg.gamma_reading = GammaReading::PosteriorMean;
  else if (reading == "drawn")
    cfg.gamma_reading = GammaReading::Drawn;
  else
    throw ConfigError("gamma_reading must be posterior_mean or drawn");

  cfg.jobs = std::max<std::uint64_t>(1, r.integer("jobs", 1));
  r.reject_unknown();
  return cfg;
}

KeyValues ExperimentConfig::to_key_values() const {
  KeyValues kv;
  switch (data.kind) {
    case DatasetKind::Synthetic:
      kv["dataset"] = "synthetic";
      kv["synthetic.n"] = std::to_string(data.synthetic.n);
      kv["synthetic.d_in"] = std::to_string(data.synthetic.input_dim);
      kv["synthetic.separation"] = format_double(data.synthetic.separation);
      kv["synthetic.flip_rate"] = format_double(data.synthetic.flip_rate);
      kv["synthetic.test_n"] = std::to_string(data.synthetic_test_n);
      break;
    case DatasetKind::Idx:
      kv["dataset"] = "idx";
      kv["idx.images"] = data.idx_images.string();
      kv["idx.labels"] = data.idx_labels.string();
      kv["idx.test_images"] = data.idx_test_images.string();
      kv["idx.test_labels"] = data.idx_test_labels.string();
      break;
    case DatasetKind::Cifar:
      kv["dataset"] = "cifar";
      kv["cifar.files"] = paths_to_string(data.cifar_files);
      kv["cifar.test_files"] = paths_to_string(data.cifar_test_files);
      break;
  }
  if (data.positive_classes) {
    std::string s;
    for (int c : *data.positive_classes) s += (s.empty() ? "" : ",") + std::to_string(c);
    kv["positive_classes"] = s;
  }
  kv["subsample"] = std::to_string(data.subsample);
  kv["test_subsample"] = std::to_string(data.test_subsample);
  kv["arch"] = arch.to_string();
  kv["loss"] = std::string(loss_kind_name(loss.kind));
  kv["p_min"] = format_double(loss.p_min);
  kv["theta"] = format_double(loss.threshold);
  kv["method"] = std::string(sampler_method_name(sampler.method));
  kv["step"] = format_double(sampler.step);
  kv["prior_width"] = format_double(sampler.prior_width);
  kv["minibatch"] = minibatch_auto ? "auto" : std::to_string(sampler.minibatch_size);
  kv["max_steps"] = std::to_string(sampler.max_steps);
  kv["record_every"] = std::to_string(sampler.record_every);
  kv["init_width"] = sampler.init_width ? format_double(*sampler.init_width) : "prior";
  kv["min_steps"] = std::to_string(stop.min_steps);
  kv["stop_epsilon"] = format_double(stop.epsilon);
  kv["alpha_stop"] = format_double(ergodic.alpha_stop);
  kv["alpha_erg"] = format_double(ergodic.alpha_erg);
  kv["filter"] = ergodic.form ? std::string(filter_form_name(*ergodic.form)) : "auto";
  kv["ladder"] = ladder.to_string();
  kv["delta"] = format_double(delta);
  kv["seed"] = std::to_string(seed);
  kv["labels"] = labels == LabelsMode::Both ? "both" : labels == LabelsMode::True ? "true" : "random";
  kv["warm_start"] = warm_start ? "true" : "false";
  kv["single_draw"] = single_draw ? "true" : "false";
  kv["uncalibrated"] = uncalibrated ? "true" : "false";
  if (fixed_r) kv["r"] = format_double(*fixed_r);
  if (penalties) {
    kv["penalties"] = std::string(penalty_mode_name(penalties->mode));
    kv["penalty.loss_bound"] = format_double(penalties->loss_bound);
    kv["penalty.proxy_bound"] = format_double(penalties->proxy_bound);
    kv["penalty.epsilon"] = list_to_string(penalties->epsilon);
  } else {
    kv["penalties"] = "off";
  }
  kv["gamma_reading"] = gamma_reading == GammaReading::Drawn ? "drawn" : "posterior_mean";
  // out_dir and jobs do not change results and stay out of the digest.
  return kv;
}

std::string ExperimentConfig::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [k, v] : to_key_values()) {
    for (const char c : k + "=" + v + "\n") {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

std::string condition_name(LabelCondition c) {
  return c == LabelCondition::True ? "true" : "random";
}

std::size_t ConditionEstimates::usable_rungs() const {
  std::size_t k = 0;
  while (k < rungs.size() && !rungs[k].diverged) ++k;
  return k;
}

LadderEstimates ConditionEstimates::estimates(std::size_t count) const {
  LadderEstimates est;
  est.n = n;
  for (std::size_t k = 0; k < count; ++k) {
    est.mean_loss.push_back(rungs[k].mean_loss);
    est.mean_01.push_back(rungs[k].mean_01);
  }
  return est;
}

std::vector<SingleDraw> ConditionEstimates::single_draws(std::size_t count) const {
  std::vector<SingleDraw> out;
  for (std::size_t k = 0; k < count; ++k) out.push_back(rungs[k].final_draw);
  return out;
}

bool ConditionEstimates::has_heldout() const {
  return !rungs.empty() && std::all_of(rungs.begin(), rungs.end(), [](const RungResult& r) {
    return r.diverged || r.heldout_mean_01.has_value();
  }) && std::any_of(rungs.begin(), rungs.end(), [](const RungResult& r) {
    return r.heldout_mean_01.has_value();
  });
}

void write_estimates_json(const ConditionEstimates& est, const fs::path& path) {
  json j;
  j["condition"] = condition_name(est.condition);
  j["n"] = est.n;
  j["ladder"] = est.ladder;
  j["config_digest"] = est.config_digest;
  json rungs = json::array();
  for (const auto& r : est.rungs) {
    rungs.push_back({{"beta", r.beta},
                     {"diverged", r.diverged},
                     {"error", r.error},
                     {"stop_step", r.stop_step},
                     {"stopped_by_rule", r.stopped_by_rule},
                     {"mean_loss", r.mean_loss},
                     {"mean_01", r.mean_01},
                     {"final_loss", r.final_draw.loss},
                     {"final_01", r.final_draw.zero_one},
                     {"heldout_mean_01", optional_to_json(r.heldout_mean_01)},
                     {"heldout_final_01", optional_to_json(r.heldout_final_01)}});
  }
  j["rungs"] = rungs;
  auto out = open_out(path);
  out << std::setprecision(17) << j.dump(2) << '\n';
}

ConditionEstimates read_estimates_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open estimates file " + path.string());
  try {
    const json j = json::parse(in);
    ConditionEstimates est;
    est.condition = j.at("condition").get<std::string>() == "random" ? LabelCondition::Random
                                                                    : LabelCondition::True;
    est.n = j.at("n").get<std::size_t>();
    est.ladder = j.at("ladder").get<std::vector<double>>();
    est.config_digest = j.value("config_digest", "");
    for (const auto& r : j.at("rungs")) {
      RungResult rr;
      rr.beta = r.at("beta").get<double>();
      rr.diverged = r.at("diverged").get<bool>();
      rr.error = r.value("error", "");
      rr.stop_step = r.value("stop_step", std::size_t{0});
      rr.stopped_by_rule = r.value("stopped_by_rule", false);
      rr.mean_loss = r.at("mean_loss").get<double>();
      rr.mean_01 = r.at("mean_01").get<double>();
      rr.final_draw.loss = r.value("final_loss", rr.mean_loss);
      rr.final_draw.zero_one = r.value("final_01", rr.mean_01);
      if (r.contains("heldout_mean_01")) rr.heldout_mean_01 = optional_from_json(r["heldout_mean_01"]);
      if (r.contains("heldout_final_01")) rr.heldout_final_01 = optional_from_json(r["heldout_final_01"]);
      est.rungs.push_back(rr);
    }
    if (est.rungs.size() != est.ladder.size())
      throw ConfigError("estimates file has " + std::to_string(est.rungs.size()) +
                        " rungs for a ladder of " + std::to_string(est.ladder.size()));
    return est;
  } catch (const json::exception& e) {
    throw ConfigError("malformed estimates file " + path.string() + ": " + e.what());
  }
}

void write_report_csv(const BoundReport& report, const std::optional<HeldoutColumns>& heldout,
                      const fs::path& path) {
  auto out = open_out(path);
  out << "beta,train_loss,train01,gamma,budget,bound01,bound01_single,penalty";
  if (heldout) out << ",test01,test01_single";
  out << '\n';
  for (std::size_t k = 0; k < report.rows.size(); ++k) {
    const auto& row = report.rows[k];
    out << format_double(row.beta) << ',' << format_double(row.train_loss) << ','
        << format_double(row.train01) << ',' << format_double(row.gamma) << ','
        << format_double(row.budget) << ',' << format_double(row.bound01) << ','
        << (row.bound01_single ? format_double(*row.bound01_single) : "") << ','
        << format_double(row.penalty);
    if (heldout)
      out << ',' << format_double(heldout->mean_01[k]) << ','
          << format_double(heldout->final_01[k]);
    out << '\n';
  }
}

void write_report_json(const BoundReport& report, const ReportMeta& meta, const fs::path& path) {
  json j;
  j["condition"] = meta.condition;
  j["delta"] = report.delta;
  j["r"] = report.r;
  j["n"] = report.n;
  j["ladder"] = report.ladder;
  j["config_digest"] = meta.config_digest;
  j["uncalibrated"] = meta.uncalibrated;
  j["small_sample_warning"] = report.small_sample_warning;
  if (meta.calibration) {
    j["calibration"] = {{"r", meta.calibration->r},
                        {"iterations", meta.calibration->iterations},
                        {"rung_bounds", meta.calibration->rung_bounds},
                        {"rung_gammas", meta.calibration->rung_gammas}};
  } else {
    j["calibration"] = nullptr;
  }
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_calibration_json(const CalibrationResult& cal, double delta, const std::string& digest,
                            const fs::path& path) {
  json j{{"r", cal.r},
         {"delta", delta},
         {"iterations", cal.iterations},
         {"rung_bounds", cal.rung_bounds},
         {"rung_gammas", cal.rung_gammas},
         {"config_digest", digest}};
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

double read_calibration_r(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open calibration file " + path.string());
  try {
    return json::parse(in).at("r").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError("malformed calibration file " + path.string() + ": " + e.what());
  }
}

BoundReport report_from_estimates(const ConditionEstimates& est, double delta, double r,
                                  bool single_draw,
                                  const std::optional<StabilityInputs>& penalties,
                                  GammaReading reading) {
  const std::size_t usable = est.usable_rungs();
  if (usable == 0) throw std::invalid_argument("no usable rungs: every chain diverged");
  const TemperatureLadder ladder(
      std::vector<double>(est.ladder.begin(), est.ladder.begin() + usable));
  ReportOptions opt;
  opt.delta = delta;
  opt.r = r;
  if (single_draw || reading == GammaReading::Drawn) opt.single_draws = est.single_draws(usable);
  if (reading == GammaReading::Drawn) {
    std::vector<double> endpoint;
    for (const auto& d : *opt.single_draws) endpoint.push_back(d.loss);
    opt.endpoint_losses = endpoint;
  }
  if (penalties) {
    std::vector<double> p(usable);
    for (std::size_t k = 0; k < usable; ++k) p[k] = stability_penalty(*penalties, ladder, k);
    opt.penalties = p;
  }
  auto report = assemble_report(ladder, est.estimates(usable), opt);
  if (!single_draw)
    for (auto& row : report.rows) row.bound01_single.reset();
  return report;
}

CalibrationResult calibrate_from_estimates(const ConditionEstimates& est, double delta,
                                           GammaReading reading) {
  const std::size_t usable = est.usable_rungs();
  if (usable < 2)
    throw std::invalid_argument("calibration needs usable rungs above beta = 0");
  const TemperatureLadder ladder(
      std::vector<double>(est.ladder.begin(), est.ladder.begin() + usable));
  std::vector<double> endpoint;
  if (reading == GammaReading::Drawn)
    for (const auto& d : est.single_draws(usable)) endpoint.push_back(d.loss);
  return calibrate(ladder, est.estimates(usable), delta, endpoint);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const LoadedData data = load_data(cfg);
  const std::string digest = cfg.digest();
  const std::size_t n = data.train.size();

  std::vector<LabelCondition> conditions;
  if (cfg.labels != LabelsMode::Random) conditions.push_back(LabelCondition::True);
  if (cfg.labels != LabelsMode::True) conditions.push_back(LabelCondition::Random);

  std::map<LabelCondition, LabeledDataset> train_sets;
  train_sets[LabelCondition::True] = data.train;
  if (cfg.labels != LabelsMode::True)
    train_sets[LabelCondition::Random] =
        randomize_labels(data.train, derive_seed(cfg.seed, 0x72616e64));

  SamplerConfig base = cfg.sampler;
  if (cfg.minibatch_auto) base.minibatch_size = default_minibatch_size(n);
  base.validate(n);

  const std::size_t rungs = cfg.ladder.size();
  ExperimentResult result;
  for (auto c : conditions) {
    ConditionEstimates est;
    est.condition = c;
    est.n = n;
    est.ladder = cfg.ladder.betas();
    est.config_digest = digest;
    est.rungs.resize(rungs);
    result.conditions.push_back(std::move(est));
  }

  const fs::path chain_dir = cfg.out_dir / "chains";
  fs::create_directories(chain_dir);

  auto run_one = [&](std::size_t ci, std::size_t k, const std::optional<ParamVector>& warm)
      -> std::optional<ParamVector> {
    const LabelCondition c = conditions[ci];
    SamplerConfig sc = base;
    sc.beta = cfg.ladder[k];
    sc.seed = chain_seed(cfg.seed, k, c);
    MlpObjective objective(cfg.arch, train_sets.at(c), cfg.loss);
    std::optional<MlpObjective> heldout;
    if (data.test) heldout.emplace(cfg.arch, *data.test, cfg.loss);
    ChainOptions opt;
    opt.initial_params = warm;
    opt.heldout = heldout ? &*heldout : nullptr;

    RungResult& rr = result.conditions[ci].rungs[k];
    rr.beta = sc.beta;
    const fs::path stem = chain_dir / (condition_name(c) + "_rung" + std::to_string(k));
    try {
      const ChainRecord rec = run_chain(objective, sc, cfg.stop, cfg.ergodic, opt);
      rr.stop_step = rec.stop_step;
      rr.stopped_by_rule = rec.stopped_by_rule;
      rr.mean_loss = rec.ergodic_mean_loss;
      rr.mean_01 = rec.ergodic_mean_01;
      rr.final_draw = {rec.loss.back(), rec.zero_one.back()};
      if (heldout) {
        rr.heldout_mean_01 = rec.ergodic_mean_heldout_01;
        rr.heldout_final_01 = rec.heldout_zero_one.back();
      }
      json summary{{"condition", condition_name(c)},
                   {"rung", k},
                   {"beta", sc.beta},
                   {"seed", sc.seed},
                   {"stop_step", rec.stop_step},
                   {"stopped_by_rule", rec.stopped_by_rule},
                   {"ergodic_mean_loss", rec.ergodic_mean_loss},
                   {"ergodic_mean_01", rec.ergodic_mean_01},
                   {"ergodic_mean_heldout_01", optional_to_json(rec.ergodic_mean_heldout_01)},
                   {"final_loss", rec.loss.back()},
                   {"final_01", rec.zero_one.back()},
                   {"method", sampler_method_name(sc.method)},
                   {"step", sc.step},
                   {"minibatch", sc.minibatch_size},
                   {"prior_width", sc.prior_width},
                   {"filter", filter_form_name(cfg.ergodic.resolved_form(sc.method))},
                   {"config_digest", digest}};
      write_chain_files(rec, summary, stem);
      return rec.final_params;
    } catch (const ChainDiverged& e) {
      rr.diverged = true;
      rr.error = e.what();
      json summary{{"condition", condition_name(c)}, {"rung", k},
                   {"beta", sc.beta}, {"diverged", true},
                   {"error", e.what()}, {"config_digest", digest}};
      auto out = open_out(fs::path(stem.string() + ".json"));
      out << summary.dump(2) << '\n';
      return std::nullopt;
    }
  };

  if (cfg.warm_start) {
    // Rung k starts where rung k-1 ended, so each condition is one task.
    run_pool(conditions.size(), cfg.jobs, [&](std::size_t ci) {
      std::optional<ParamVector> warm;
      for (std::size_t k = 0; k < rungs; ++k) warm = run_one(ci, k, warm);
    });
  } else {
    run_pool(conditions.size() * rungs, cfg.jobs, [&](std::size_t task) {
      run_one(task / rungs, task % rungs, std::nullopt);
    });
  }

  result.all_diverged = true;
  for (const auto& est : result.conditions) {
    write_estimates_json(est, cfg.out_dir / ("estimates_" + condition_name(est.condition) + ".json"));
    if (est.usable_rungs() > 0) result.all_diverged = false;
  }
  if (result.all_diverged) return result;

  const ConditionEstimates* random_est = nullptr;
  for (const auto& est : result.conditions)
    if (est.condition == LabelCondition::Random) random_est = &est;

  if (cfg.uncalibrated) {
    result.r = 1.0;
  } else if (cfg.fixed_r) {
    result.r = *cfg.fixed_r;
  } else if (random_est && random_est->usable_rungs() >= 2) {
    result.calibration = calibrate_from_estimates(*random_est, cfg.delta, cfg.gamma_reading);
    result.r = result.calibration->r;
    write_calibration_json(*result.calibration, cfg.delta, digest,
                           cfg.out_dir / "calibration.json");
  } else {
    throw ConfigError(
        "calibration needs a random-label run; set labels = both, uncalibrated = true, or r");
  }

  for (const auto& est : result.conditions) {
    if (est.usable_rungs() == 0) continue;
    const auto report = report_from_estimates(est, cfg.delta, result.r, cfg.single_draw,
                                              cfg.penalties, cfg.gamma_reading);
    std::optional<HeldoutColumns> heldout;
    if (data.test) {
      HeldoutColumns cols;
      for (std::size_t k = 0; k < report.rows.size(); ++k) {
        cols.mean_01.push_back(est.rungs[k].heldout_mean_01.value_or(NAN));
        cols.final_01.push_back(est.rungs[k].heldout_final_01.value_or(NAN));
      }
      heldout = cols;
    }
    const std::string name = condition_name(est.condition);
    write_report_csv(report, heldout, cfg.out_dir / ("report_" + name + ".csv"));
    write_report_json(report, {name, digest, cfg.uncalibrated, result.calibration},
                      cfg.out_dir / ("report_" + name + ".json"));
    result.reports.emplace(est.condition, report);
  }
  return result;
}

std::size_t emit_curves(const fs::path& report_csv, const fs::path& out_csv) {
  std::ifstream in(report_csv);
  if (!in) throw std::runtime_error("cannot open report " + report_csv.string());
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("report has no header row");
  std::vector<std::string> cols;
  {
    std::stringstream ss(header);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(trim(c));
  }
  auto index_of = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(cols.begin(), cols.end(), name);
    if (it == cols.end()) return std::nullopt;
    return static_cast<std::size_t>(it - cols.begin());
  };
  const auto beta_col = index_of("beta");
  const auto train_col = index_of("train01");
  const auto bound_col = index_of("bound01");
  const auto test_col = index_of("test01");
  if (!beta_col || !train_col || !bound_col)
    throw std::runtime_error("report is missing beta/train01/bound01 columns");

  auto out = open_out(out_csv);
  out << "beta,series,value\n";
  std::size_t rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    while (cells.size() < cols.size()) cells.emplace_back();
    auto emit = [&](const char* series, std::size_t col) {
      out << cells[*beta_col] << ',' << series << ',' << cells[col] << '\n';
      ++rows;
    };
    emit("train01", *train_col);
    if (test_col) emit("test01", *test_col);
    emit("bound01", *bound_col);
  }
  return rows;
}

}  // namespace gibbs
