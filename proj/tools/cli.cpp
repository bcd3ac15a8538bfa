#include "cli.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "manifest.hpp"
#include "tridetect/binary_io.hpp"
#include "tridetect/data.hpp"
#include "tridetect/errors.hpp"
#include "tridetect/model.hpp"
#include "tridetect/theory.hpp"
#include "tridetect/trainer.hpp"

namespace fs = std::filesystem;

namespace tridetect::cli {
namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<std::uint8_t> read_input(const fs::path& path, const char* what) {
  try {
    return io::read_file(path);
  } catch (const std::exception&) {
    throw std::runtime_error(std::string(what) + ": cannot read " + path.string());
  }
}

// Applies flat "key = value" lines to options of `sub` that were not given on
// the command line. Unknown keys and sections are errors.
void apply_config(CLI::App& sub, const std::string& path) {
  if (path.empty()) return;
  for (const auto& item : CLI::ConfigINI().from_file(path)) {
    CLI::Option* opt = item.parents.empty() ? sub.get_option_no_throw("--" + item.name) : nullptr;
    if (!opt || item.name == "config") throw CLI::ConfigError::Extras(item.fullname());
    if (opt->count() > 0) continue;
    opt->add_result(item.inputs);
    opt->run_callback();
  }
}

std::uint64_t resolve_seed(const CLI::Option* opt, std::uint64_t value) {
  if (opt->count() > 0) return value;
  const char* env = std::getenv("TRIDETECT_SEED");
  if (!env || !*env) return value;
  std::uint64_t seed = 0;
  const char* end = env + std::char_traits<char>::length(env);
  const auto [ptr, ec] = std::from_chars(env, end, seed);
  if (ec != std::errc() || ptr != end)
    throw UsageError(std::string("TRIDETECT_SEED is not an unsigned integer: ") + env);
  return seed;
}

template <typename F>
void validated(F&& check) {
  try {
    check();
  } catch (const ContractViolation& e) {
    throw UsageError(e.what());
  }
}

const char* family_name(std::uint8_t f) {
  switch (f) {
    case kGanLike: return "gan_like";
    case kDmLike: return "dm_like";
    default: return "unknown";
  }
}

struct LoadedModel {
  TriarchyModel model;
  std::vector<std::uint8_t> bytes;
};

LoadedModel load_checkpoint(const fs::path& path) {
  LoadedModel m{{}, read_input(path, "model")};
  m.model = decode_model(m.bytes);
  return m;
}

struct LoadedData {
  EmbeddingDataset ds;
  std::vector<std::uint8_t> bytes;
};

LoadedData load_data(const fs::path& path, const char* what) {
  LoadedData d{{}, read_input(path, what)};
  d.ds = decode_dataset(d.bytes);
  return d;
}

void require_dims(const TriarchyModel& m, const EmbeddingDataset& ds) {
  if (m.input_dim() != ds.dim())
    throw std::runtime_error("checkpoint input_dim " + std::to_string(m.input_dim()) +
                             " does not match dataset dim " + std::to_string(ds.dim()));
}

std::string synth_text(const SyntheticSpec& s) {
  std::string out;
  auto kv = [&](const char* k, const std::string& v) { out += std::string(k) + " = " + v + "\n"; };
  kv("dim", std::to_string(s.dim));
  kv("n-real", std::to_string(s.n_real));
  kv("n-gan", std::to_string(s.n_fake_gan));
  kv("n-dm", std::to_string(s.n_fake_dm));
  kv("separation", num(s.separation));
  kv("coverage-fraction", num(s.coverage_fraction));
  kv("seed", std::to_string(s.seed));
  kv("layout-seed", std::to_string(s.layout_seed));
  kv("modes", std::to_string(s.modes));
  kv("mode-radius", num(s.mode_radius));
  kv("component-std", num(s.component_std));
  kv("gan-spread", num(s.gan_spread));
  kv("dm-spread", num(s.dm_spread));
  kv("ambient-std", num(s.ambient_std));
  return out;
}

std::string curve_csv(const char* x, const char* y, const std::vector<CurvePoint>& pts) {
  std::string out = std::string(x) + "," + y + ",threshold\n";
  for (const auto& p : pts) out += num(p.x) + "," + num(p.y) + "," + num(p.threshold) + "\n";
  return out;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  SyntheticSpec spec;
  std::string out;
  std::string config;
  CLI::Option* seed = nullptr;
};

void add_synth(CLI::App& app, SynthArgs& a) {
  auto* c = app.add_subcommand("synth", "Write a synthetic two-family embedding dataset (TDEM)");
  auto& s = a.spec;
  c->add_option("--out", a.out, "Output dataset path")->required();
  c->add_option("--config", a.config, "Flat key = value config file; flags override it");
  c->add_option("--dim", s.dim, "Embedding width (>= 4)")->capture_default_str();
  c->add_option("--n-real", s.n_real, "Real records")->capture_default_str();
  c->add_option("--n-gan", s.n_fake_gan, "GAN-like fake records")->capture_default_str();
  c->add_option("--n-dm", s.n_fake_dm, "DM-like fake records")->capture_default_str();
  c->add_option("--separation", s.separation, "Family offset norm in component stds")
      ->capture_default_str();
  c->add_option("--coverage-fraction", s.coverage_fraction,
                "Share of real modes the GAN-like family samples")
      ->capture_default_str();
  a.seed = c->add_option("--seed", s.seed, "Sampling seed")->capture_default_str();
  c->add_option("--layout-seed", s.layout_seed, "Seed of the embedding geometry")
      ->capture_default_str();
  c->add_option("--modes", s.modes, "Mixture modes")->capture_default_str();
  c->add_option("--mode-radius", s.mode_radius, "Mode circle radius")->capture_default_str();
  c->add_option("--component-std", s.component_std, "In-plane std of a real mode")
      ->capture_default_str();
  c->add_option("--gan-spread", s.gan_spread, "GAN-like spread factor")->capture_default_str();
  c->add_option("--dm-spread", s.dm_spread, "DM-like spread factor")->capture_default_str();
  c->add_option("--ambient-std", s.ambient_std, "Off-plane noise relative to in-plane")
      ->capture_default_str();
}

int cmd_synth(SynthArgs& a, std::ostream& out) {
  a.spec.seed = resolve_seed(a.seed, a.spec.seed);
  validated([&] { a.spec.validate(); });
  const EmbeddingDataset ds = make_synthetic(a.spec);

  const fs::path path(a.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  Manifest m("synth");
  m.set("seed", std::to_string(a.spec.seed));
  m.section("spec", synth_text(a.spec));
  m.set("output.path", path.string());
  m.set("output.records", std::to_string(ds.size()));
  m.write(fs::path(path.string() + ".manifest.txt"));

  const auto bytes = encode_dataset(ds);
  io::write_file_atomic(path, bytes);
  out << "wrote " << ds.size() << " records (dim " << ds.dim() << ") to " << path.string()
      << "\nsha256 " << sha256_hex(bytes) << "\n";
  return kOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  TrainConfig cfg;
  std::string data, paired, init, out, config;
  bool quiet = false;
  CLI::Option* seed = nullptr;
};

void add_train(CLI::App& app, TrainArgs& a) {
  auto* c = app.add_subcommand("train", "Train the classifier head on a TDEM dataset");
  auto& t = a.cfg;
  c->add_option("--data", a.data, "Training dataset (TDEM)")->required();
  c->add_option("--out", a.out, "Output directory")->required();
  c->add_option("--paired", a.paired, "Second-view dataset; replaces embedding jitter");
  c->add_option("--init", a.init, "Start from this checkpoint instead of a fresh init");
  c->add_option("--config", a.config, "Flat key = value config file; flags override it");
  c->add_flag("--quiet", a.quiet, "No per-epoch progress lines");
  c->add_option("--epochs", t.epochs)->capture_default_str();
  c->add_option("--batch-size", t.batch_size)->capture_default_str();
  c->add_option("--lr", t.lr)->capture_default_str();
  c->add_option("--adam-beta1", t.adam_beta1)->capture_default_str();
  c->add_option("--adam-beta2", t.adam_beta2)->capture_default_str();
  c->add_option("--adam-eps", t.adam_eps)->capture_default_str();
  c->add_option("--weight-decay", t.weight_decay, "Decoupled weight decay")->capture_default_str();
  c->add_option("--beta", t.loss.beta, "Binary vs cluster loss balance")->capture_default_str();
  c->add_option("--omega1", t.loss.omega1, "Swapped-prediction weight")->capture_default_str();
  c->add_option("--omega2", t.loss.omega2, "Consistency weight")->capture_default_str();
  c->add_option("--tau", t.loss.tau, "Cluster softmax temperature")->capture_default_str();
  c->add_option("--epsilon", t.sinkhorn.epsilon, "Sinkhorn entropic regularization")
      ->capture_default_str();
  c->add_option("--sinkhorn-iters", t.sinkhorn.iterations)->capture_default_str();
  c->add_option("--augment-strength", t.augment_strength, "Embedding jitter, in batch stds")
      ->capture_default_str();
  a.seed = c->add_option("--seed", t.seed)->capture_default_str();
  c->add_option("--clusters", t.clusters, "Fake clusters K")->capture_default_str();
  c->add_option("--hidden", t.hidden, "Hidden widths, comma separated")
      ->delimiter(',')
      ->capture_default_str();
  c->add_flag("--detach-consistency", t.detach_consistency,
              "Report the consistency loss without back-propagating it");
}

int cmd_train(TrainArgs& a, std::ostream& out) {
  a.cfg.seed = resolve_seed(a.seed, a.cfg.seed);
  validated([&] { a.cfg.validate(); });
  const TrainConfig& cfg = a.cfg;

  const LoadedData data = load_data(a.data, "data");
  if (data.ds.empty()) throw std::runtime_error("data: dataset has no records");
  std::optional<LoadedData> paired;
  if (!a.paired.empty()) {
    paired = load_data(a.paired, "paired");
    if (paired->ds.size() != data.ds.size() || paired->ds.dim() != data.ds.dim())
      throw std::runtime_error("paired: record count or dim differs from data");
  }
  std::optional<LoadedModel> init;
  if (!a.init.empty()) {
    init = load_checkpoint(a.init);
    require_dims(init->model, data.ds);
  }

  const fs::path dir(a.out);
  fs::create_directories(dir);
  Manifest m("train");
  m.set("seed", std::to_string(cfg.seed));
  m.input("data", a.data, data.bytes);
  if (paired) m.input("paired", a.paired, paired->bytes);
  if (init) m.input("init", a.init, init->bytes);
  m.section("config", config_text(cfg));
  m.write(dir / "manifest.txt");

  auto progress = [&](const TrainState& s) {
    if (a.quiet) return;
    const auto& e = s.epochs.back();
    char line[200];
    std::snprintf(line, sizeof line,
                  "epoch %d/%d  total %.4f  binary %.4f  assignment %.4f  consistency %.4f  "
                  "minority %.3f\n",
                  e.epoch + 1, cfg.epochs, e.mean.total, e.mean.binary, e.mean.assignment,
                  e.mean.consistency, e.minority_share);
    out << line;
  };
  const TrainState st = train(data.ds, cfg, paired ? &paired->ds : nullptr, progress,
                              init ? &init->model : nullptr);

  std::string header = "# tridetect training run\n";
  header += "# head-only training on precomputed embeddings; the encoder is external and frozen\n";
  header += "# optimizer: adam with decoupled weight decay\n";
  header += "# views: " + std::string(paired ? "paired file" : "embedding jitter") + "\n";
  header += config_text(cfg);

  io::write_file_atomic(dir / "model.tdmd", encode_model(st.model));
  io::write_file_atomic(dir / "history.csv", history_csv(st));
  io::write_file_atomic(dir / "epochs.csv", epochs_csv(st));
  io::write_file_atomic(dir / "run_header.txt", header);
  out << "wrote " << (dir / "model.tdmd").string() << " after " << st.step << " steps\n";
  return kOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string model, data, out, name;
};

void add_model_data(CLI::App* c, EvalArgs& a) {
  c->add_option("--model", a.model, "Checkpoint (TDMD)")->required();
  c->add_option("--data", a.data, "Dataset (TDEM)")->required();
  c->add_option("--out", a.out, "Output directory")->required();
  c->add_option("--name", a.name, "Dataset name used in reports (default: file stem)");
}

struct Scored {
  LoadedModel model;
  LoadedData data;
  std::vector<ScoredSample> samples;
};

Scored score(EvalArgs& a) {
  Scored s{load_checkpoint(a.model), load_data(a.data, "data"), {}};
  require_dims(s.model.model, s.data.ds);
  if (a.name.empty()) a.name = fs::path(a.data).stem().string();
  s.samples = scored_samples(s.data.ds, evaluate(s.model.model, s.data.ds));
  return s;
}

int cmd_eval(EvalArgs& a, std::ostream& out, std::ostream& err) {
  const Scored s = score(a);
  const auto rows = metric_report(s.samples);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  Manifest m("eval");
  m.input("model", a.model, s.model.bytes);
  m.input("data", a.data, s.data.bytes);
  m.set("dataset", a.name);
  m.write(dir / "manifest.txt");

  io::write_file_atomic(dir / "metrics.csv", metrics_csv(a.name, rows));
  io::write_file_atomic(dir / "metrics.txt", metrics_text(a.name, rows));
  for (const auto& r : rows)
    if (!r.value) err << "warning: " << r.metric << " undefined: " << r.note << "\n";
  try {
    io::write_file_atomic(dir / "roc.csv", curve_csv("fpr", "tpr", roc_curve(s.samples)));
    io::write_file_atomic(dir / "pr.csv", curve_csv("recall", "precision", pr_curve(s.samples)));
  } catch (const UndefinedMetric& e) {
    err << "warning: roc/pr curves not written: " << e.what() << "\n";
  }
  out << metrics_text(a.name, rows);
  return kOk;
}

// ---------------------------------------------------------------- cluster-report

int cmd_cluster_report(EvalArgs& a, std::ostream& out, std::ostream& err) {
  const Scored s = score(a);
  const std::size_t k = s.model.model.clusters();

  std::map<std::pair<int, int>, std::size_t> table;
  std::vector<std::size_t> sizes(k, 0);
  std::size_t fakes = 0;
  bool families_known = false;
  for (const auto& x : s.samples) {
    if (x.label != kFake) continue;
    ++fakes;
    ++sizes[static_cast<std::size_t>(*x.cluster)];
    ++table[{*x.cluster, x.family}];
    families_known = families_known || x.family != kUnknownFamily;
  }

  std::string clusters = "cluster,family,family_name,count\n";
  for (const auto& [key, count] : table)
    clusters += std::to_string(key.first) + "," + std::to_string(key.second) + "," +
                family_name(static_cast<std::uint8_t>(key.second)) + "," + std::to_string(count) +
                "\n";

  std::string assignments = "index,label,family,score,cluster\n";
  for (std::size_t i = 0; i < s.samples.size(); ++i) {
    const auto& x = s.samples[i];
    assignments += std::to_string(i) + "," + std::to_string(x.label) + "," +
                   std::to_string(x.family) + "," + num(x.score) + "," +
                   (x.cluster ? std::to_string(*x.cluster) : "") + "\n";
  }

  std::vector<MetricRow> rows;
  rows.push_back({"fake_samples", static_cast<double>(fakes), ""});
  double minority = 0.0;
  if (fakes) minority = static_cast<double>(*std::min_element(sizes.begin(), sizes.end())) / fakes;
  rows.push_back({"minority_share", fakes ? std::optional<double>(minority) : std::nullopt,
                  fakes ? "" : "no fake samples"});
  if (families_known) {
    rows.push_back({"purity", cluster_purity(s.samples), ""});
    rows.push_back({"nmi", nmi(s.samples), ""});
  } else {
    err << "warning: no fake sample has a known family; purity and nmi omitted\n";
  }

  const fs::path dir(a.out);
  fs::create_directories(dir);
  Manifest m("cluster-report");
  m.input("model", a.model, s.model.bytes);
  m.input("data", a.data, s.data.bytes);
  m.set("dataset", a.name);
  m.write(dir / "manifest.txt");
  io::write_file_atomic(dir / "clusters.csv", clusters);
  io::write_file_atomic(dir / "assignments.csv", assignments);
  io::write_file_atomic(dir / "summary.csv", metrics_csv(a.name, rows));

  out << "fake-sample clusters for " << a.name << " (K = " << k << ")\n";
  for (std::size_t c = 0; c < k; ++c) {
    out << "  cluster " << c << ": " << sizes[c] << " samples";
    for (const auto& [key, count] : table)
      if (key.first == static_cast<int>(c))
        out << "  " << family_name(static_cast<std::uint8_t>(key.second)) << "=" << count;
    out << "\n";
  }
  out << metrics_text(a.name, rows);
  return kOk;
}

// ---------------------------------------------------------------- theory-check

struct TheoryArgs {
  TheoryOptions opt;
  std::string out, config;
  CLI::Option* seed = nullptr;
};

void add_theory(CLI::App& app, TheoryArgs& a) {
  auto* c = app.add_subcommand("theory-check", "Verify the divergence identities and bounds");
  auto& o = a.opt;
  c->add_option("--out", a.out, "Also write the table and coverage CSV to this directory");
  c->add_option("--config", a.config, "Flat key = value config file; flags override it");
  a.seed = c->add_option("--seed", o.seed)->capture_default_str();
  c->add_option("--atoms", o.atoms, "Atoms per random distribution")->capture_default_str();
  c->add_flag("--sinkhorn", o.sinkhorn, "Also check the balanced-assignment constraints");
  c->add_option("--pairs", o.pairs, "Random pairs for the identity checks")->capture_default_str();
  c->add_option("--inequality-pairs", o.inequality_pairs)->capture_default_str();
  c->add_option("--discriminators", o.discriminators_per_pair)->capture_default_str();
  c->add_option("--latent-models", o.latent_models)->capture_default_str();
}

int cmd_theory(TheoryArgs& a, std::ostream& out) {
  a.opt.seed = resolve_seed(a.seed, a.opt.seed);
  TheoryReport r;
  validated([&] { r = run_theory_checks(a.opt); });
  out << r.table();
  if (r.coverage) out << "\n" << coverage_csv(*r.coverage);
  if (!a.out.empty()) {
    const fs::path dir(a.out);
    fs::create_directories(dir);
    Manifest m("theory-check");
    m.set("seed", std::to_string(a.opt.seed));
    m.set("atoms", std::to_string(a.opt.atoms));
    m.set("sinkhorn", a.opt.sinkhorn ? "true" : "false");
    m.set("pairs", std::to_string(a.opt.pairs));
    m.set("inequality_pairs", std::to_string(a.opt.inequality_pairs));
    m.set("discriminators", std::to_string(a.opt.discriminators_per_pair));
    m.set("latent_models", std::to_string(a.opt.latent_models));
    m.write(dir / "manifest.txt");
    io::write_file_atomic(dir / "theory.txt", r.table());
    if (r.coverage) io::write_file_atomic(dir / "coverage.csv", coverage_csv(*r.coverage));
  }
  out << (r.all_passed() ? "all checks passed\n" : "some checks FAILED\n");
  return r.all_passed() ? kOk : kFailure;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"tridetect: balanced-cluster real/fake detection on embeddings", "tridetect"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  SynthArgs synth;
  TrainArgs train_args;
  EvalArgs eval_args, cluster_args;
  TheoryArgs theory;
  add_synth(app, synth);
  add_train(app, train_args);
  add_model_data(app.add_subcommand("eval", "Detection metrics, ROC and PR points"), eval_args);
  add_model_data(app.add_subcommand("cluster-report", "Fake-cluster composition and agreement"),
                 cluster_args);
  add_theory(app, theory);

  try {
    app.parse(argc, argv);
    CLI::App* cmd = app.get_subcommands().front();
    const std::string name = cmd->get_name();
    if (name == "synth") {
      apply_config(*cmd, synth.config);
      return cmd_synth(synth, out);
    }
    if (name == "train") {
      apply_config(*cmd, train_args.config);
      return cmd_train(train_args, out);
    }
    if (name == "eval") return cmd_eval(eval_args, out, err);
    if (name == "cluster-report") return cmd_cluster_report(cluster_args, out, err);
    apply_config(*cmd, theory.config);
    return cmd_theory(theory, out);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const TrainingAborted& e) {
    err << "error: training aborted at " << e.what() << "\n";
    return kTrainAborted;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace tridetect::cli
