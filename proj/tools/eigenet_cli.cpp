#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "eigenet/eigenet.hpp"
#include "eigenet/simulator/corpus.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace eigenet;

namespace {

constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

struct Globals {
  std::string config_path;
  bool deterministic = false;
  int threads = 1;
  int verbosity = 1;
};

Globals g;

void log(const std::string& msg, int level = 1) {
  if (g.verbosity >= level) std::cerr << msg << '\n';
}

json load_config() {
  if (g.config_path.empty()) return json::object();
  std::ifstream in(g.config_path);
  require(static_cast<bool>(in), ErrorKind::MissingArtifact, "cannot read config " + g.config_path);
  return json::parse(in);
}

template <typename T>
T section(const json& cfg, const char* key) {
  return cfg.contains(key) ? cfg.at(key).get<T>() : T{};
}

std::string file_hash(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::MissingArtifact, "missing " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return nn::hex(fnv1a(ss.str()));
}

/// Refuses to write into a non-empty directory unless forced.
void prepare_output(const fs::path& out, bool force) {
  if (fs::exists(out) && !fs::is_empty(out)) {
    require(force, ErrorKind::Io, "output directory " + out.string() + " is not empty (use --force)");
    fs::remove_all(out);
  }
  fs::create_directories(out);
}

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2) << '\n'; }

/// Writes resolved_config.json: the full effective config of the run plus
/// its hash and the hashes of the artifacts it consumed.
void write_resolved(const fs::path& out, const std::string& command, const json& config, const json& inputs) {
  json j = {{"command", command},
            {"config", config},
            {"config_hash", nn::hex(nn::config_hash(config))},
            {"inputs", inputs},
            {"deterministic", g.deterministic},
            {"threads", g.threads}};
  write_json(out / "resolved_config.json", j);
}

// ---------------------------------------------------------------- artifacts

struct Corpus {
  fs::path dir;
  std::string hash;
  std::vector<data::Scene> train, test;
};

Corpus load_corpus(const fs::path& dir, bool need_train, bool need_test) {
  Corpus c{dir, file_hash(dir / "corpus.json"), {}, {}};
  if (need_train) c.train = data::read_corpus(dir, data::corpus_split(dir, "train"));
  if (need_test) c.test = data::read_corpus(dir, data::corpus_split(dir, "test"));
  return c;
}

/// Loads a codec and checks that its parameters still match the recorded hash.
codec::LoadedCodec load_codec_checked(const fs::path& dir) {
  auto c = codec::load_codec(dir);
  const auto recorded = c.header.at("param_hash").get<std::string>();
  require(recorded == nn::hex(c.codec.params().hash()), ErrorKind::HashChainBroken,
          "codec parameters in " + dir.string() + " do not match their recorded hash");
  return c;
}

/// Loads a model and checks it was trained against `codec` and `corpus_hash`.
trainer::LoadedModel load_model_checked(const fs::path& dir, const codec::FrozenCodec& codec,
                                        const std::string& corpus_hash) {
  auto m = trainer::load_model(dir);
  require(m.codec_hash == nn::hex(codec.hash()), ErrorKind::HashChainBroken,
          "model " + dir.string() + " was trained against codec " + m.codec_hash + ", got " + nn::hex(codec.hash()));
  const auto& training = m.header.at("config").value("training", json::object());
  if (training.contains("corpus_hash"))
    require(training.at("corpus_hash").get<std::string>() == corpus_hash, ErrorKind::HashChainBroken,
            "model " + dir.string() + " was trained on a different corpus");
  return m;
}

std::vector<int> parse_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    const int v = std::stoi(item, &used);
    if (used != item.size()) throw CLI::ValidationError("expected a comma-separated integer list: " + s);
    out.push_back(v);
  }
  if (out.empty()) throw CLI::ValidationError("expected a comma-separated integer list: " + s);
  return out;
}

std::vector<std::uint64_t> to_seeds(const std::vector<int>& v) {
  std::vector<std::uint64_t> out;
  for (int x : v) out.push_back(static_cast<std::uint64_t>(x));
  return out;
}

trainer::LogSink jsonl_sink(std::ofstream& out) {
  return [&out](const trainer::TrainLogRow& row) {
    out << json(row).dump() << '\n';
    out.flush();
    if (row.kind == "train")
      log("step " + std::to_string(row.step) + " loss " + std::to_string(row.loss), 2);
    else
      log("validation @" + std::to_string(row.step) + " " + row.validation.dump());
  };
}

// ---------------------------------------------------------------- options

struct SimulateOpts {
  std::string out;
  int scenes = -1;
  long long seed = -1;
  double train_ratio = -1;
  bool force = false;
};

struct CodecOpts {
  std::string data, out;
  int steps = -1;
  long long seed = -1;
  bool force = false;
};

struct ModelOverrides {
  std::string attention, modulation, spectrum, geometry;
  int f = -1, blocks = -1, heads = -1;

  void apply(model::ModelConfig& mc) const {
    if (!attention.empty()) mc.attention = model::parse_enum<model::AttentionKind>(attention, "attention");
    if (!modulation.empty()) mc.use_modulation = modulation == "on";
    if (!spectrum.empty()) mc.spectrum_target = model::parse_enum<model::SpectrumTarget>(spectrum, "spectrum");
    if (!geometry.empty()) mc.geometry_inputs = model::parse_enum<model::GeometryInputs>(geometry, "geometry");
    if (f > 0) mc.f = f;
    if (blocks > 0) mc.blocks = blocks;
    if (heads > 0) mc.heads = heads;
  }
};

struct TrainOverrides {
  int steps = -1, batch = -1, warmup = -1, eval_every = -1;
  double lr = -1;
  long long seed = -1;

  void apply(trainer::TrainConfig& tc) const {
    if (steps > 0) tc.steps = steps;
    if (batch > 0) tc.batch = batch;
    if (warmup >= 0) tc.loss.warmup_steps = warmup;
    if (eval_every >= 0) tc.eval_every = eval_every;
    if (lr > 0) tc.adam.lr = lr;
    if (seed >= 0) tc.seed = static_cast<std::uint64_t>(seed);
  }
};

struct TrainOpts {
  std::string data, codec, out;
  ModelOverrides model;
  TrainOverrides train;
  bool force = false;
};

struct EvalOpts {
  std::string data, codec, model, out;
  std::string ks = "1,4,8", seeds, methods = "model,baselines";
  int targets = -1;
  bool bands = false, force = false;
};

struct ProbeOpts {
  std::string data, codec, model, out;
  std::string modes = "geo,ac", keeps = "0,1,4", seeds;
  int refs = 8, targets = -1;
  bool force = false;
};

struct BaselineOpts {
  std::string data, out, ks = "1,4,8", seeds, kinds = "random_across,random_same,knn,linear_interp";
  int targets = -1;
  bool bands = false, force = false;
};

struct ReportOpts {
  std::string in, out;
};

struct AblateOpts {
  std::string data, codec, out;
  std::string ks = "8", seeds;
  int targets = -1;
  bool geometry = false, force = false;
  ModelOverrides model;
  TrainOverrides train;
};

trainer::EvalConfig eval_config(const json& cfg, const std::string& ks, const std::string& seeds, int targets,
                                bool bands) {
  auto ec = section<trainer::EvalConfig>(cfg, "evaluation");
  ec.ks = parse_ints(ks);
  if (!seeds.empty()) ec.seeds = to_seeds(parse_ints(seeds));
  if (targets > 0) ec.targets_per_scene = targets;
  ec.octave_breakdown = ec.octave_breakdown || bands;
  ec.threads = g.threads;
  return ec;
}

// ---------------------------------------------------------------- commands

int cmd_simulate(const SimulateOpts& o) {
  json cfg = load_config();
  auto cc = section<sim::CorpusConfig>(cfg, "corpus");
  if (o.scenes > 0) cc.scenes = o.scenes;
  if (o.seed >= 0) cc.seed = static_cast<std::uint64_t>(o.seed);
  if (o.train_ratio > 0) cc.train_ratio = o.train_ratio;
  const fs::path out = o.out;
  prepare_output(out, o.force);
  sim::simulate_corpus(cc, out, g.threads, [](const std::string& m) { log(m, 2); });
  write_resolved(out, "simulate", {{"corpus", cc}}, json::object());
  log("wrote " + std::to_string(cc.scenes) + " scenes to " + out.string());
  return 0;
}

int cmd_pretrain_codec(const CodecOpts& o) {
  json cfg = load_config();
  auto cc = section<codec::CodecConfig>(cfg, "codec");
  auto tc = section<codec::CodecTrainConfig>(cfg, "codec_training");
  if (o.steps > 0) tc.max_steps = o.steps;
  if (o.seed >= 0) tc.seed = static_cast<std::uint64_t>(o.seed);
  tc.min_steps = std::min(tc.min_steps, tc.max_steps);
  const auto corpus = load_corpus(o.data, true, true);
  const fs::path out = o.out;
  prepare_output(out, o.force);

  std::vector<const acoustics::Rir*> train, val;
  for (const auto& s : corpus.train)
    for (const auto& h : s.rirs) train.push_back(&h);
  for (const auto& s : corpus.test)
    for (const auto& h : s.rirs) val.push_back(&h);
  auto result = codec::pretrain_codec(train, val, cc, tc, [](const std::string& m) { log(m); });

  const json extra = {{"corpus_hash", corpus.hash}, {"codec_training", tc}, {"steps", result.steps}};
  codec::save_codec(out / "checkpoint", result.codec, extra);
  std::ofstream logf(out / "log.jsonl");
  for (const auto& row : result.log) logf << json{{"step", row.step}, {"loss", row.loss}}.dump() << '\n';
  json evals = json::array();
  for (const auto& [step, rep] : result.evaluations) evals.push_back({{"step", step}, {"gate", rep}});
  write_json(out / "gate.json", {{"thresholds", tc.gate}, {"final", result.gate}, {"evaluations", evals},
                                 {"heldout_rirs", val.size()}});
  write_resolved(out, "pretrain-codec", {{"codec", cc}, {"codec_training", tc}},
                 {{"data", fs::absolute(o.data).string()}, {"corpus_hash", corpus.hash}});
  log("codec hash " + nn::hex(result.codec.hash()));
  codec::require_gate(result.gate, tc.gate);
  return 0;
}

int cmd_train(const TrainOpts& o) {
  json cfg = load_config();
  auto mc = section<model::ModelConfig>(cfg, "model");
  auto tc = section<trainer::TrainConfig>(cfg, "training");
  o.model.apply(mc);
  o.train.apply(tc);
  const auto corpus = load_corpus(o.data, true, tc.eval_every > 0);
  const auto cdc = load_codec_checked(fs::path(o.codec) / "checkpoint");
  const auto& ctraining = cdc.header.at("config").value("training", json::object());
  if (ctraining.contains("corpus_hash"))
    require(ctraining.at("corpus_hash").get<std::string>() == corpus.hash, ErrorKind::HashChainBroken,
            "codec was pretrained on a different corpus");
  mc.codec_latent_dim = cdc.codec.arch().config().latent_dim;
  mc.validate();
  const fs::path out = o.out;
  prepare_output(out, o.force);

  const auto train_caches = trainer::build_caches(corpus.train, cdc.codec, mc.spectrum_target);
  const auto val_caches = trainer::build_caches(corpus.test, cdc.codec, mc.spectrum_target);
  std::ofstream logf(out / "train_log.jsonl");
  const auto before = cdc.codec.hash();
  auto result = trainer::train(mc, train_caches, cdc.codec, tc, val_caches, jsonl_sink(logf));
  require(cdc.codec.hash() == before, ErrorKind::HashChainBroken, "codec parameters changed during training");

  const json extra = {{"corpus_hash", corpus.hash}, {"train", tc}};
  trainer::save_model(out / "checkpoint", result.model, cdc.codec.hash(), extra);
  write_resolved(out, "train", {{"model", mc}, {"training", tc}},
                 {{"data", fs::absolute(o.data).string()},
                  {"corpus_hash", corpus.hash},
                  {"codec", fs::absolute(o.codec).string()},
                  {"codec_hash", nn::hex(cdc.codec.hash())}});
  log("model hash " + nn::hex(result.model.params.hash()));
  return 0;
}

void write_metrics(const fs::path& out, const trainer::MetricsReport& rep) {
  trainer::write_metrics_csv(out / "metrics.csv", rep);
  write_json(out / "metrics.json", rep);
  bool bands = false;
  for (const auto& r : rep.rows) bands = bands || !r.bands.empty();
  if (bands) trainer::write_bands_csv(out / "bands.csv", rep);
}

int cmd_evaluate(const EvalOpts& o) {
  json cfg = load_config();
  const auto ec = eval_config(cfg, o.ks, o.seeds, o.targets, o.bands);
  const auto corpus = load_corpus(o.data, false, true);
  const auto cdc = load_codec_checked(fs::path(o.codec) / "checkpoint");
  const auto m = load_model_checked(fs::path(o.model) / "checkpoint", cdc.codec, corpus.hash);
  const fs::path out = o.out;
  prepare_output(out, o.force);

  const auto caches = trainer::build_caches(corpus.test, cdc.codec, model::SpectrumTarget::None);
  std::vector<trainer::Method> methods;
  if (o.methods.find("model") != std::string::npos)
    methods.push_back(trainer::model_method("eigenet", m.model, cdc.codec));
  if (o.methods.find("baselines") != std::string::npos)
    for (auto& b : trainer::all_baselines(caches)) methods.push_back(std::move(b));
  require(!methods.empty(), ErrorKind::ConfigInvalid, "no methods selected");
  auto rep = trainer::evaluate(methods, caches, ec);
  rep.metadata["model"] = m.header.at("config").at("model");
  write_metrics(out, rep);
  write_resolved(out, "evaluate", {{"evaluation", ec}},
                 {{"data", fs::absolute(o.data).string()},
                  {"corpus_hash", corpus.hash},
                  {"codec_hash", nn::hex(cdc.codec.hash())},
                  {"model", fs::absolute(o.model).string()},
                  {"model_hash", m.header.at("param_hash")}});
  for (const auto& r : rep.rows)
    log(r.method + " K=" + std::to_string(r.k) + " edt " + std::to_string(r.mean.edt) + " c50 " +
        std::to_string(r.mean.c50) + " t60 " + std::to_string(r.mean.t60));
  return 0;
}

int cmd_probe(const ProbeOpts& o) {
  json cfg = load_config();
  auto ec = eval_config(cfg, std::to_string(o.refs), o.seeds, o.targets, false);
  std::vector<model::ProbeSpec::Mode> modes;
  std::stringstream ss(o.modes);
  for (std::string m; std::getline(ss, m, ',');) {
    if (m == "geo") modes.push_back(model::ProbeSpec::Mode::MaskGeo);
    else if (m == "ac") modes.push_back(model::ProbeSpec::Mode::MaskAc);
    else throw CLI::ValidationError("--mode must be geo, ac or geo,ac");
  }
  const auto keeps = parse_ints(o.keeps);
  const auto corpus = load_corpus(o.data, false, true);
  const auto cdc = load_codec_checked(fs::path(o.codec) / "checkpoint");
  const auto m = load_model_checked(fs::path(o.model) / "checkpoint", cdc.codec, corpus.hash);
  const fs::path out = o.out;
  prepare_output(out, o.force);

  const auto caches = trainer::build_caches(corpus.test, cdc.codec, model::SpectrumTarget::None);
  const auto rows = trainer::run_probe(m.model, cdc.codec, caches, o.refs, modes, keeps, ec);
  trainer::write_probe_csv(out / "probe.csv", rows);
  write_json(out / "probe.json", {{"rows", rows}, {"model", m.header.at("config").at("model")}});
  write_resolved(out, "probe", {{"evaluation", ec}, {"modes", o.modes}, {"keeps", keeps}, {"refs", o.refs}},
                 {{"corpus_hash", corpus.hash},
                  {"codec_hash", nn::hex(cdc.codec.hash())},
                  {"model_hash", m.header.at("param_hash")}});
  for (const auto& r : rows)
    log(r.mode + " keep=" + std::to_string(r.keep) + " edt " + std::to_string(r.mean.edt) + " c50 " +
        std::to_string(r.mean.c50) + " t60 " + std::to_string(r.mean.t60));
  return 0;
}

int cmd_baseline(const BaselineOpts& o) {
  json cfg = load_config();
  const auto ec = eval_config(cfg, o.ks, o.seeds, o.targets, o.bands);
  const auto corpus = load_corpus(o.data, false, true);
  const fs::path out = o.out;
  prepare_output(out, o.force);
  std::vector<trainer::SceneCache> caches;
  for (const auto& s : corpus.test) {
    trainer::SceneCache c;
    c.scene = &s;
    caches.push_back(std::move(c));
  }
  std::vector<trainer::Method> methods;
  std::stringstream ss(o.kinds);
  for (std::string k; std::getline(ss, k, ',');)
    methods.push_back(trainer::baseline_method(model::parse_enum<trainer::BaselineKind>(k, "baseline"), caches));
  const auto rep = trainer::evaluate(methods, caches, ec);
  write_metrics(out, rep);
  write_resolved(out, "baseline", {{"evaluation", ec}, {"kinds", o.kinds}}, {{"corpus_hash", corpus.hash}});
  return 0;
}

int cmd_report(const ReportOpts& o) {
  const fs::path in = o.in;
  const fs::path out = o.out.empty() ? in : fs::path(o.out);
  require(fs::is_directory(in), ErrorKind::MissingArtifact, "no such directory " + in.string());
  fs::create_directories(out);
  std::vector<fs::path> written;
  auto append = [&](const std::vector<fs::path>& v) { written.insert(written.end(), v.begin(), v.end()); };
  if (fs::exists(in / "metrics.csv")) append(trainer::render_k_scaling(in / "metrics.csv", out));
  if (fs::exists(in / "bands.csv")) append(trainer::render_bands(in / "bands.csv", out));
  if (fs::exists(in / "probe.csv")) {
    const auto t = trainer::read_csv(in / "probe.csv");
    std::vector<std::string> groups;
    for (std::size_t i = 0; i < t.rows.size(); ++i) groups.push_back(t.at(i, "mode") + " " + t.at(i, "keep"));
    for (const auto& [col, label] : trainer::metric_columns()) {
      trainer::Series s{"model", {}};
      for (std::size_t i = 0; i < t.rows.size(); ++i) s.values.push_back(t.number(i, col));
      const auto p = out / ("probe_" + col + ".svg");
      std::ofstream(p) << trainer::svg_bar_chart("Masking probe: " + label, label, groups, {s});
      written.push_back(p);
    }
  }
  if (fs::exists(in / "ablation.csv")) {
    const auto t = trainer::read_csv(in / "ablation.csv");
    std::vector<std::string> cells;
    for (std::size_t i = 0; i < t.rows.size(); ++i)
      if (std::find(cells.begin(), cells.end(), t.at(i, "cell")) == cells.end()) cells.push_back(t.at(i, "cell"));
    for (const auto& [col, label] : trainer::metric_columns()) {
      std::vector<trainer::Series> series;
      for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto name = "K=" + t.at(i, "k");
        auto it = std::find_if(series.begin(), series.end(), [&](const auto& s) { return s.name == name; });
        if (it == series.end()) {
          series.push_back({name, std::vector<double>(cells.size(), std::numeric_limits<double>::quiet_NaN())});
          it = series.end() - 1;
        }
        it->values[static_cast<std::size_t>(std::find(cells.begin(), cells.end(), t.at(i, "cell")) - cells.begin())] =
            t.number(i, col);
      }
      const auto p = out / ("ablation_" + col + ".svg");
      std::ofstream(p) << trainer::svg_bar_chart("Ablation: " + label, label, cells, series);
      written.push_back(p);
    }
  }
  require(!written.empty(), ErrorKind::MissingArtifact,
          "no metrics.csv, bands.csv, probe.csv or ablation.csv in " + in.string());
  for (const auto& p : written) log("wrote " + p.string());
  return 0;
}

int cmd_ablate(const AblateOpts& o) {
  json cfg = load_config();
  auto mc = section<model::ModelConfig>(cfg, "model");
  auto tc = section<trainer::TrainConfig>(cfg, "training");
  o.model.apply(mc);
  o.train.apply(tc);
  tc.eval_every = 0;
  const auto ec = eval_config(cfg, o.ks, o.seeds, o.targets, false);
  const auto corpus = load_corpus(o.data, true, true);
  const auto cdc = load_codec_checked(fs::path(o.codec) / "checkpoint");
  mc.codec_latent_dim = cdc.codec.arch().config().latent_dim;
  const fs::path out = o.out;
  prepare_output(out, o.force);

  const auto cells = trainer::ablation_cells(mc, o.geometry);
  const auto results =
      trainer::run_ablation(cells, corpus.train, corpus.test, cdc.codec, tc, ec, [](const std::string& m) { log(m); });
  trainer::write_ablation_csv(out / "ablation.csv", results);
  json cells_json = json::array();
  for (const auto& r : results)
    cells_json.push_back({{"cell", r.cell.name}, {"tables", r.cell.tables}, {"model", r.cell.cfg}, {"report", r.report}});
  const int wins = trainer::modulation_c50_wins(trainer::read_csv(out / "ablation.csv"));
  write_json(out / "ablation.json",
             {{"cells", cells_json},
              {"modulation_c50_wins", wins},
              {"modulation_trend", wins >= 2 ? "reproduced" : "trend-not-reproduced"}});
  write_resolved(out, "ablate", {{"model", mc}, {"training", tc}, {"evaluation", ec}, {"geometry_cells", o.geometry}},
                 {{"corpus_hash", corpus.hash}, {"codec_hash", nn::hex(cdc.codec.hash())}});
  log("modulation beats no modulation on C50 for " + std::to_string(wins) + " of 3 attention kinds");
  return 0;
}

void add_model_flags(CLI::App* c, ModelOverrides& m) {
  c->add_option("--attention", m.attention, "Backbone")->check(CLI::IsMember({"aa", "sa", "ca"}));
  c->add_option("--modulation", m.modulation, "Geometry-informed modulation")->check(CLI::IsMember({"on", "off"}));
  c->add_option("--spectrum", m.spectrum, "Auxiliary spectrum target")
      ->check(CLI::IsMember({"none", "full", "octave"}));
  c->add_option("--geometry", m.geometry, "Geometry inputs")->check(CLI::IsMember({"full", "depth", "location"}));
  c->add_option("--f", m.f, "Token width")->check(CLI::PositiveNumber);
  c->add_option("--blocks", m.blocks, "Backbone blocks")->check(CLI::PositiveNumber);
  c->add_option("--heads", m.heads, "Attention heads")->check(CLI::PositiveNumber);
}

void add_train_flags(CLI::App* c, TrainOverrides& t) {
  c->add_option("--steps", t.steps, "Optimizer steps")->check(CLI::PositiveNumber);
  c->add_option("--batch", t.batch, "Examples per step")->check(CLI::PositiveNumber);
  c->add_option("--warmup", t.warmup, "Loss warmup steps")->check(CLI::NonNegativeNumber);
  c->add_option("--eval-every", t.eval_every, "Validation interval (0 disables)")->check(CLI::NonNegativeNumber);
  c->add_option("--lr", t.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  c->add_option("--seed", t.seed, "Training seed")->check(CLI::NonNegativeNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot novel-view RIR prediction: simulation, training, evaluation"};
  app.require_subcommand(1);
  app.add_option("--config", g.config_path, "JSON run config (sections: corpus, codec, codec_training, model, "
                                            "training, evaluation)");
  app.add_flag("--deterministic", g.deterministic, "Single-threaded numerics for bit-exact reruns");
  app.add_option("--threads", g.threads, "Worker threads for simulation and evaluation")->check(CLI::PositiveNumber);
  if (const char* t = std::getenv("EIGENET_THREADS")) g.threads = std::max(1, std::atoi(t));
  if (const char* v = std::getenv("EIGENET_VERBOSE")) g.verbosity = std::atoi(v);

  SimulateOpts so;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate a scene corpus");
  sim_cmd->add_option("--out", so.out, "Output directory")->required();
  sim_cmd->add_option("--scenes", so.scenes, "Number of scenes")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", so.seed, "Corpus seed")->check(CLI::NonNegativeNumber);
  sim_cmd->add_option("--train-ratio", so.train_ratio, "Scene-level train fraction")->check(CLI::Range(0.0, 1.0));
  sim_cmd->add_flag("--force", so.force, "Overwrite a non-empty output directory");

  CodecOpts co;
  auto* codec_cmd = app.add_subcommand("pretrain-codec", "Pretrain and freeze the RIR codec");
  codec_cmd->add_option("--data", co.data, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  codec_cmd->add_option("--out", co.out, "Output directory")->required();
  codec_cmd->add_option("--steps", co.steps, "Maximum optimizer steps")->check(CLI::PositiveNumber);
  codec_cmd->add_option("--seed", co.seed, "Seed")->check(CLI::NonNegativeNumber);
  codec_cmd->add_flag("--force", co.force, "Overwrite a non-empty output directory");

  TrainOpts to;
  auto* train_cmd = app.add_subcommand("train", "Train a model against a frozen codec");
  train_cmd->add_option("--data", to.data, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  train_cmd->add_option("--codec", to.codec, "pretrain-codec output directory")->required();
  train_cmd->add_option("--out", to.out, "Output directory")->required();
  add_model_flags(train_cmd, to.model);
  add_train_flags(train_cmd, to.train);
  train_cmd->add_flag("--force", to.force, "Overwrite a non-empty output directory");

  EvalOpts eo;
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a model and the baselines on the test split");
  eval_cmd->add_option("--data", eo.data, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--codec", eo.codec, "pretrain-codec output directory")->required();
  eval_cmd->add_option("--model", eo.model, "train output directory")->required();
  eval_cmd->add_option("--out", eo.out, "Output directory")->required();
  eval_cmd->add_option("--k", eo.ks, "Reference counts, comma separated");
  eval_cmd->add_option("--seeds", eo.seeds, "Reference-sampling seeds, comma separated");
  eval_cmd->add_option("--methods", eo.methods, "model, baselines, or both")
      ->check(CLI::IsMember({"model", "baselines", "model,baselines", "baselines,model"}));
  eval_cmd->add_option("--targets-per-scene", eo.targets, "Targets per test scene")->check(CLI::PositiveNumber);
  eval_cmd->add_flag("--bands", eo.bands, "Add the per-octave-band breakdown");
  eval_cmd->add_flag("--force", eo.force, "Overwrite a non-empty output directory");

  ProbeOpts po;
  auto* probe_cmd = app.add_subcommand("probe", "Masking probes over reference tokens");
  probe_cmd->add_option("--data", po.data, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  probe_cmd->add_option("--codec", po.codec, "pretrain-codec output directory")->required();
  probe_cmd->add_option("--model", po.model, "train output directory")->required();
  probe_cmd->add_option("--out", po.out, "Output directory")->required();
  probe_cmd->add_option("--mode", po.modes, "geo, ac, or geo,ac");
  probe_cmd->add_option("--keep", po.keeps, "Visible reference counts, comma separated");
  probe_cmd->add_option("--refs", po.refs, "Reference views")->check(CLI::PositiveNumber);
  probe_cmd->add_option("--seeds", po.seeds, "Reference-sampling seeds, comma separated");
  probe_cmd->add_option("--targets-per-scene", po.targets, "Targets per test scene")->check(CLI::PositiveNumber);
  probe_cmd->add_flag("--force", po.force, "Overwrite a non-empty output directory");

  BaselineOpts bo;
  auto* base_cmd = app.add_subcommand("baseline", "Evaluate the classical baselines only");
  base_cmd->add_option("--data", bo.data, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  base_cmd->add_option("--out", bo.out, "Output directory")->required();
  base_cmd->add_option("--k", bo.ks, "Reference counts, comma separated");
  base_cmd->add_option("--seeds", bo.seeds, "Reference-sampling seeds, comma separated");
  base_cmd->add_option("--kind", bo.kinds, "Baselines, comma separated");
  base_cmd->add_option("--targets-per-scene", bo.targets, "Targets per test scene")->check(CLI::PositiveNumber);
  base_cmd->add_flag("--bands", bo.bands, "Add the per-octave-band breakdown");
  base_cmd->add_flag("--force", bo.force, "Overwrite a non-empty output directory");

  ReportOpts ro;
  auto* report_cmd = app.add_subcommand("report", "Render SVG plots from existing CSV outputs");
  report_cmd->add_option("--in", ro.in, "Directory holding metrics/bands/probe/ablation CSVs")->required();
  report_cmd->add_option("--out", ro.out, "Output directory (default: --in)");

  AblateOpts ao;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate the spectrum and attention ablation matrix");
  ablate_cmd->add_option("--data", ao.data, "Corpus directory")->required()->check(CLI::ExistingDirectory);
  ablate_cmd->add_option("--codec", ao.codec, "pretrain-codec output directory")->required();
  ablate_cmd->add_option("--out", ao.out, "Output directory")->required();
  ablate_cmd->add_option("--k", ao.ks, "Reference counts, comma separated");
  ablate_cmd->add_option("--seeds", ao.seeds, "Reference-sampling seeds, comma separated");
  ablate_cmd->add_option("--targets-per-scene", ao.targets, "Targets per test scene")->check(CLI::PositiveNumber);
  ablate_cmd->add_flag("--geometry-cells", ao.geometry, "Also run the depth-only and location-only variants");
  add_model_flags(ablate_cmd, ao.model);
  add_train_flags(ablate_cmd, ao.train);
  ablate_cmd->add_flag("--force", ao.force, "Overwrite a non-empty output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  if (g.deterministic) g.threads = 1;

  try {
    if (*sim_cmd) return cmd_simulate(so);
    if (*codec_cmd) return cmd_pretrain_codec(co);
    if (*train_cmd) return cmd_train(to);
    if (*eval_cmd) return cmd_evaluate(eo);
    if (*probe_cmd) return cmd_probe(po);
    if (*base_cmd) return cmd_baseline(bo);
    if (*report_cmd) return cmd_report(ro);
    if (*ablate_cmd) return cmd_ablate(ao);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const eigenet::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDomain;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDomain;
  }
  return kExitUsage;
}
