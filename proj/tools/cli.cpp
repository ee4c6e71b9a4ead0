#include "cli.hpp"

#include <openssl/evp.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "difflab/csv.hpp"
#include "difflab/datasets.hpp"
#include "difflab/errors.hpp"
#include "difflab/inference.hpp"
#include "difflab/profiler.hpp"
#include "difflab/trainer.hpp"

namespace difflab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string git_blob_hash(const std::string& bytes) {
  const std::string head = "blob " + std::to_string(bytes.size()) + '\0';
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw IoError("sha1: cannot allocate digest context");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, head.data(), head.size()) == 1 &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 && EVP_DigestFinal_ex(ctx, md, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw IoError("sha1: digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

namespace {

std::string read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + p.string());
  f << s;
  if (!f.flush()) throw IoError("write failed on " + p.string());
}

}  // namespace

std::string git_blob_hash_file(const fs::path& p) { return git_blob_hash(read_bytes(p)); }

fs::path resolve_output_dir(const fs::path& dir) {
  if (dir.is_absolute()) return dir;
  if (const char* root = std::getenv(kOutputRootEnv); root && *root) return fs::path(root) / dir;
  return dir;
}

namespace {

// Collects inputs and outputs for manifest.json.
class Manifest {
 public:
  Manifest(std::string command, std::vector<std::string> argv) {
    doc_ = {{"tool", "difflab"}, {"schema_version", kSchemaVersion}, {"command", std::move(command)},
            {"argv", std::move(argv)}, {"inputs", json::array()}, {"outputs", json::array()}};
  }
  json& operator[](const char* key) { return doc_[key]; }
  void input(const fs::path& p) { doc_["inputs"].push_back({{"path", p.string()}, {"hash", git_blob_hash_file(p)}}); }
  void output(const fs::path& dir, const std::string& name) {
    doc_["outputs"].push_back({{"path", name}, {"hash", git_blob_hash_file(dir / name)}});
  }
  void write(const fs::path& dir) const { write_text(dir / "manifest.json", doc_.dump(2) + "\n"); }

 private:
  json doc_;
};

fs::path prepare_dir(const fs::path& requested) {
  const fs::path dir = resolve_output_dir(requested);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

std::pair<int, int> parse_range(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ConfigError("range '" + s + "' is not lo:hi");
  try {
    return {static_cast<int>(parse_int(s.substr(0, colon))), static_cast<int>(parse_int(s.substr(colon + 1)))};
  } catch (const IoError&) {
    throw ConfigError("range '" + s + "' is not lo:hi");
  }
}

std::vector<std::optional<std::pair<int, int>>> parse_ranges(const std::string& s) {
  std::vector<std::optional<std::pair<int, int>>> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "none" || item.empty()) out.emplace_back(std::nullopt);
    else out.emplace_back(parse_range(item));
  }
  if (out.empty()) throw ConfigError("no ablation ranges given");
  return out;
}

HeadChoice head_for(const Checkpoint& ck, const std::string& head) {
  const TrainConfig cfg = config_from_checkpoint(ck);
  if (head == "auto") {
    if (!cfg.mixed) return cfg.pred_type;
    return head_table_from_counts(selection_counts_from_checkpoint(ck));
  }
  return parse_prediction_type(head);
}

json head_json(const HeadChoice& h) {
  if (const auto* p = std::get_if<PredictionType>(&h)) return name(*p);
  json a = json::array();
  for (PredictionType p : std::get<std::vector<PredictionType>>(h)) a.push_back(name(p));
  return a;
}

std::string range_label(const std::optional<std::pair<int, int>>& r) {
  return r ? std::to_string(r->first) + ":" + std::to_string(r->second) : "none";
}

LossProfile measure(const DenoiserModel& m, const Tensor& data, const Schedule& s, PredictionType pt,
                    ErrorSpace space, std::size_t n_per_t, std::uint64_t seed, const std::string& model_id,
                    const std::string& dataset_id) {
  ProfileOptions o;
  o.pred_type = pt;
  o.space = space;
  o.n_per_t = n_per_t;
  LossProfile p = profile(m, data, s, o, Rng(seed).stream("profile"));
  p.model_id = model_id;
  p.dataset_id = dataset_id;
  return p;
}

// ---- subcommands ---------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string output_dir;
};

void cmd_train(const TrainArgs& a, Manifest& man, std::ostream& out) {
  if (!fs::exists(a.config)) throw ConfigError("config not found: " + a.config);
  json doc;
  try {
    doc = json::parse(read_bytes(a.config));
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  std::string outdir_cfg;
  json train;
  bool has_version = false;
  for (const auto& [key, value] : doc.items()) {
    if (key == "schema_version") {
      has_version = true;
      if (value != kSchemaVersion) throw ConfigError("unsupported schema_version " + value.dump());
    } else if (key == "output_dir") {
      outdir_cfg = value.get<std::string>();
    } else if (key == "train") {
      train = value;
    } else if (key == "description") {
      // Free text, ignored.
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
  if (!has_version) throw ConfigError("config: missing schema_version");
  if (train.is_null()) throw ConfigError("config: missing 'train' section");
  TrainConfig cfg = TrainConfig::from_json(train);
  cfg.base_dir = fs::absolute(a.config).parent_path();
  cfg.validate();

  const std::string requested = a.output_dir.empty() ? outdir_cfg : a.output_dir;
  if (requested.empty()) throw ConfigError("no output directory: set output_dir or --output-dir");
  const fs::path dir = prepare_dir(requested);

  Trainer trainer(cfg);
  const TrainArtifacts art = run_training(trainer, dir);

  man.input(a.config);
  man["config"] = cfg.to_json();
  man["config_hash"] = cfg.hash();
  man["seeds"] = {{"seed", cfg.seed}, {"dataset_seed", cfg.dataset.seed}};
  man.output(dir, art.metrics_csv.filename().string());
  for (const auto& p : art.checkpoints) man.output(dir, p.filename().string());
  for (const auto& p : art.profiles) man.output(dir, p.filename().string());
  man.output(dir, art.final_checkpoint.filename().string());
  if (art.selection_csv) man.output(dir, art.selection_csv->filename().string());
  man.write(dir);
  out << "trained " << cfg.steps << " steps -> " << dir.string() << "\n";
}

struct ProfileArgs {
  std::string checkpoint;
  std::string pred_type = "auto";
  std::string space = "target";
  std::size_t n_per_t = kDefaultMinSamples;
  std::optional<std::uint64_t> seed;
  std::string output_dir = "profile";
};

void cmd_profile(const ProfileArgs& a, Manifest& man, std::ostream& out) {
  const Checkpoint ck = read_checkpoint(a.checkpoint);
  const TrainConfig cfg = config_from_checkpoint(ck);
  const DenoiserModel m = model_from_checkpoint(ck);
  const Schedule s = schedule_from_checkpoint(ck);
  const Tensor data = generate(cfg.dataset);
  const PredictionType pt =
      a.pred_type == "auto" ? (cfg.mixed ? PredictionType::A : cfg.pred_type) : parse_prediction_type(a.pred_type);
  const std::uint64_t seed = a.seed.value_or(cfg.seed);
  const std::string model_id = git_blob_hash_file(a.checkpoint);
  const LossProfile p = measure(m, data, s, pt, parse_error_space(a.space), a.n_per_t, seed, model_id, cfg.dataset.id());

  const fs::path dir = prepare_dir(a.output_dir);
  p.write_csv(dir / "profile.csv");
  man.input(a.checkpoint);
  man["seeds"] = {{"profile_seed", seed}};
  man["options"] = {{"pred_type", name(pt)}, {"space", name(p.space)}, {"n_per_t", a.n_per_t}};
  man["model_id"] = model_id;
  man["dataset_id"] = cfg.dataset.id();
  man.output(dir, "profile.csv");
  man.write(dir);
  out << "profile (" << name(pt) << ", " << name(p.space) << ") -> " << (dir / "profile.csv").string() << "\n";
}

struct SlotsArgs {
  std::string profile;
  std::size_t n_slots = 10;
  std::size_t min_samples = kDefaultMinSamples;
  std::string output_dir = "slots";
};

void cmd_slots(const SlotsArgs& a, Manifest& man, std::ostream& out) {
  const LossProfile p = LossProfile::read_csv(fs::path(a.profile));
  const SlotPartition part = compute_slots(p, a.n_slots, a.min_samples);
  const fs::path dir = prepare_dir(a.output_dir);
  part.write_json(dir / "partition.json");
  man.input(a.profile);
  man["options"] = {{"n_slots", a.n_slots}, {"min_samples", a.min_samples}};
  man.output(dir, "partition.json");
  man.write(dir);
  for (const Slot& sl : part.bounds) out << "[" << sl.lo << "," << sl.hi << "] ";
  out << "\n";
}

struct FinetuneArgs {
  std::string checkpoint;
  std::string range;
  int slot = 0;
  std::string partition;
  long long steps = 5000;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
  std::size_t n_per_t = kDefaultMinSamples;
  std::string output_dir = "finetune";
};

void cmd_finetune(const FinetuneArgs& a, Manifest& man, std::ostream& out) {
  const Checkpoint ck = read_checkpoint(a.checkpoint);
  TrainConfig cfg = config_from_checkpoint(ck);
  const std::uint64_t profile_seed = cfg.seed;

  std::optional<SlotPartition> part;
  std::pair<int, int> range;
  if (!a.range.empty()) {
    if (a.slot != 0) throw ConfigError("give either --range or --slot, not both");
    range = parse_range(a.range);
    if (!a.partition.empty()) part = SlotPartition::read_json(a.partition);
  } else {
    if (a.slot < 1 || a.partition.empty()) throw ConfigError("need --range lo:hi or --slot k with --partition");
    part = SlotPartition::read_json(a.partition);
    if (static_cast<std::size_t>(a.slot) > part->n_slots()) {
      throw ConfigError("slot " + std::to_string(a.slot) + " not in partition of " + std::to_string(part->n_slots()));
    }
    const Slot& sl = part->bounds[static_cast<std::size_t>(a.slot - 1)];
    range = {sl.lo, sl.hi};
  }

  cfg.restrict_range = range;
  cfg.steps = a.steps;
  if (a.seed) cfg.seed = *a.seed;
  if (a.lr) cfg.lr = *a.lr;
  cfg.checkpoint_every = 0;
  cfg.profile_every = 0;
  cfg.validate();

  const fs::path dir = prepare_dir(a.output_dir);
  Trainer trainer(cfg, ck, false);
  const PredictionType pt = cfg.mixed ? PredictionType::A : cfg.pred_type;
  const std::string ds = cfg.dataset.id();
  std::array<LossProfile, 2> before;
  for (ErrorSpace sp : {ErrorSpace::Target, ErrorSpace::X0}) {
    before[static_cast<int>(sp)] = measure(trainer.model(), trainer.data(), trainer.schedule(), pt, sp, a.n_per_t,
                                           profile_seed, "before", ds);
  }
  const TrainArtifacts art = run_training(trainer, dir);
  fs::rename(art.final_checkpoint, dir / "finetuned.ckpt");

  man.input(a.checkpoint);
  if (!a.partition.empty()) man.input(a.partition);
  man["config"] = cfg.to_json();
  man["seeds"] = {{"seed", cfg.seed}, {"profile_seed", profile_seed}};
  man["range"] = {range.first, range.second};
  man.output(dir, "metrics.csv");
  man.output(dir, "finetuned.ckpt");

  for (ErrorSpace sp : {ErrorSpace::Target, ErrorSpace::X0}) {
    const std::string tag(name(sp));
    const LossProfile& b = before[static_cast<int>(sp)];
    const LossProfile after =
        measure(trainer.model(), trainer.data(), trainer.schedule(), pt, sp, a.n_per_t, profile_seed, "after", ds);
    b.write_csv(dir / ("profile_before_" + tag + ".csv"));
    after.write_csv(dir / ("profile_after_" + tag + ".csv"));
    const ProfileDiff d = diff_profiles(b, after, part);
    std::ostringstream diff;
    diff << kProfileDiffHeader << '\n';
    for (std::size_t i = 0; i < d.delta.size(); ++i) {
      diff << (i + 1) << ',' << format_double(b.mean[i]) << ',' << format_double(after.mean[i]) << ','
           << format_double(d.delta[i]) << '\n';
    }
    write_text(dir / ("profile_diff_" + tag + ".csv"), diff.str());
    for (const char* f : {"profile_before_", "profile_after_", "profile_diff_"}) man.output(dir, f + tag + ".csv");
    if (part) {
      std::ostringstream sd;
      sd << kSlotDiffHeader << '\n';
      for (std::size_t k = 0; k < part->n_slots(); ++k) {
        sd << (k + 1) << ',' << part->bounds[k].lo << ',' << part->bounds[k].hi << ',' << format_double(d.slot_delta[k])
           << '\n';
      }
      write_text(dir / ("slot_diff_" + tag + ".csv"), sd.str());
      man.output(dir, "slot_diff_" + tag + ".csv");
      out << tag << " slot deltas:";
      for (double v : d.slot_delta) out << ' ' << format_double(v);
      out << "\n";
    }
  }
  man.write(dir);
  out << "fine-tuned [" << range.first << "," << range.second << "] for " << a.steps << " steps -> " << dir.string()
      << "\n";
}

struct AblateArgs {
  std::string checkpoint;
  std::string ranges = "none,1:10,1:500,500:1000";
  std::size_t trials = 20;
  std::uint64_t seed = 0;
  std::string head = "auto";
  double clamp = 1.5;
  std::string output_dir = "ablate";
};

void cmd_ablate(const AblateArgs& a, Manifest& man, std::ostream& out) {
  const Checkpoint ck = read_checkpoint(a.checkpoint);
  const TrainConfig cfg = config_from_checkpoint(ck);
  const DenoiserModel m = model_from_checkpoint(ck);
  const Schedule s = schedule_from_checkpoint(ck);
  const Tensor oracle = generate(cfg.dataset);
  const HeadChoice head = head_for(ck, a.head);
  const auto ranges = parse_ranges(a.ranges);
  ReverseOptions opts;
  opts.clamp_bound = a.clamp;
  const auto rows = ablate_reconstruction(m, s, head, oracle, ranges, a.trials, a.seed, opts);

  const fs::path dir = prepare_dir(a.output_dir);
  std::ostringstream csv;
  csv << kAblationHeader << '\n';
  for (const AblationRow& r : rows) {
    csv << range_label(r.range) << ',' << (r.range ? std::to_string(r.range->first) : "") << ','
        << (r.range ? std::to_string(r.range->second) : "") << ',' << format_double(r.mean_mse) << ','
        << format_double(r.std_err) << ',' << r.trials << '\n';
    out << range_label(r.range) << ": " << format_double(r.mean_mse) << " +- " << format_double(r.std_err) << "\n";
  }
  write_text(dir / "ablation.csv", csv.str());
  man.input(a.checkpoint);
  man["seeds"] = {{"ablation_seed", a.seed}};
  man["options"] = {{"ranges", a.ranges}, {"trials", a.trials}, {"head", head_json(head)}, {"clamp", a.clamp}};
  man.output(dir, "ablation.csv");
  man.write(dir);
}

struct CoeffsArgs {
  std::string source;
  std::string kind = "linear";
  int T = 1000;
  std::string output_dir = "coeffs";
};

void cmd_coeffs(const CoeffsArgs& a, Manifest& man, std::ostream& out) {
  std::optional<Schedule> s;
  if (!a.source.empty()) {
    const fs::path p(a.source);
    if (!fs::exists(p)) throw ConfigError("schedule source not found: " + a.source);
    if (p.extension() == ".json") {
      try {
        s = Schedule::from_json(json::parse(read_bytes(p)));
      } catch (const json::exception& e) {
        throw ConfigError(std::string("bad schedule manifest: ") + e.what());
      }
    } else {
      s = schedule_from_checkpoint(read_checkpoint(p));
    }
    man.input(p);
  } else {
    ScheduleConfig sc;
    sc.kind = a.kind;
    sc.T = a.T;
    s = sc.build();
  }
  const fs::path dir = prepare_dir(a.output_dir);
  std::ostringstream csv;
  csv << kCoeffsHeader << '\n';
  for (int t = 1; t <= s->T(); ++t) {
    const PosteriorCoeffs c = s->posterior_coefficients(t);
    csv << t << ',' << format_double(s->beta(t)) << ',' << format_double(s->alpha_bar(t)) << ','
        << format_double(s->sigma2(t)) << ',' << format_double(c.coef_x0) << ',' << format_double(c.coef_xt) << '\n';
  }
  write_text(dir / "coeffs.csv", csv.str());
  man["schedule"] = s->to_json();
  man.output(dir, "coeffs.csv");
  man.write(dir);
  out << "coefficients for " << s->kind() << " T=" << s->T() << " -> " << (dir / "coeffs.csv").string() << "\n";
}

struct SampleArgs {
  std::string checkpoint;
  std::size_t n = 2000;
  std::string head = "auto";
  std::uint64_t seed = 0;
  double clamp = 1.5;
  std::string output_dir = "sample";
};

void cmd_sample(const SampleArgs& a, Manifest& man, std::ostream& out) {
  const Checkpoint ck = read_checkpoint(a.checkpoint);
  const TrainConfig cfg = config_from_checkpoint(ck);
  const DenoiserModel m = model_from_checkpoint(ck);
  const Schedule s = schedule_from_checkpoint(ck);
  const HeadChoice head = head_for(ck, a.head);
  ReverseOptions opts;
  opts.clamp_bound = a.clamp;
  StepStats stats;
  const Tensor x = generate(m, s, head, a.n, a.seed, opts, &stats);

  const fs::path dir = prepare_dir(a.output_dir);
  std::ostringstream csv;
  csv << kSamplesHeader << '\n';
  for (std::size_t i = 0; i < x.rows(); ++i) csv << format_double(x.at(i, 0)) << ',' << format_double(x.at(i, 1)) << '\n';
  write_text(dir / "samples.csv", csv.str());

  json report = {{"n", a.n}, {"head", head_json(head)}, {"clamped_rows", stats.clamped_rows}, {"model_rows", stats.rows}};
  if (a.n > 0) {
    // Held-out reference: same distribution, different dataset seed.
    DatasetSpec ref = cfg.dataset;
    ref.seed = cfg.dataset.seed + 1;
    ref.n = a.n;
    const Tensor held_out = generate(ref);
    RngStream nrng = Rng(a.seed).stream("noise-baseline");
    const Tensor noise = nrng.gauss({a.n, x.cols()});
    const double ed = energy_distance(x, held_out);
    const double ed_noise = energy_distance(noise, held_out);
    report["reference"] = ref.to_json();
    report["energy_distance"] = ed;
    report["noise_energy_distance"] = ed_noise;
    report["ratio"] = ed > 0 ? ed_noise / ed : 0.0;
    out << "energy distance " << format_double(ed) << " (pure noise " << format_double(ed_noise) << ")\n";
  }
  write_text(dir / "energy.json", report.dump(2) + "\n");
  man.input(a.checkpoint);
  man["seeds"] = {{"sample_seed", a.seed}};
  man.output(dir, "samples.csv");
  man.output(dir, "energy.json");
  man.write(dir);
}

struct DatasetArgs {
  std::string kind = "eight_gaussians";
  std::size_t n = 10000;
  double noise_std = DatasetSpec{}.noise_std;
  std::uint64_t seed = 0;
  std::string output_dir = "dataset";
};

void cmd_dataset(const DatasetArgs& a, Manifest& man, std::ostream& out) {
  const DatasetSpec spec{parse_dataset_kind(a.kind), a.n, a.noise_std, a.seed};
  const Tensor x = generate(spec);
  const fs::path dir = prepare_dir(a.output_dir);
  std::ostringstream csv;
  csv << kSamplesHeader << '\n';
  for (std::size_t i = 0; i < x.rows(); ++i) csv << format_double(x.at(i, 0)) << ',' << format_double(x.at(i, 1)) << '\n';
  write_text(dir / "dataset.csv", csv.str());
  man["dataset"] = spec.to_json();
  man["dataset_id"] = spec.id();
  man.output(dir, "dataset.csv");
  man.write(dir);
  out << spec.id() << " -> " << (dir / "dataset.csv").string() << "\n";
}

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::numeric: return kExitNumeric;
    case ErrorKind::io: return kExitIo;
    default: return kExitConfig;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"difflab: per-timestep loss experiments on toy diffusion models"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "difflab 0.1.0");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train from an experiment config");
  train->add_option("config", ta.config, "Experiment config JSON")->required();
  train->add_option("--output-dir", ta.output_dir, "Override the config's output_dir");

  ProfileArgs pa;
  auto* prof = app.add_subcommand("profile", "Per-timestep loss profile of a checkpoint");
  prof->add_option("checkpoint", pa.checkpoint)->required();
  prof->add_option("--pred-type", pa.pred_type, "d | v | a | auto")->capture_default_str();
  prof->add_option("--space", pa.space, "target | x0")->capture_default_str();
  prof->add_option("--n-per-t", pa.n_per_t)->capture_default_str();
  prof->add_option("--seed", pa.seed, "Defaults to the training seed");
  prof->add_option("--output-dir", pa.output_dir)->capture_default_str();

  SlotsArgs sa;
  auto* slots = app.add_subcommand("slots", "Equal-cumulative-loss slot partition of a profile");
  slots->add_option("profile", sa.profile)->required();
  slots->add_option("--n-slots", sa.n_slots)->capture_default_str();
  slots->add_option("--min-samples", sa.min_samples)->capture_default_str();
  slots->add_option("--output-dir", sa.output_dir)->capture_default_str();

  FinetuneArgs fa;
  auto* ft = app.add_subcommand("finetune", "Continue training on a timestep range; diff profiles before/after");
  ft->add_option("checkpoint", fa.checkpoint)->required();
  ft->add_option("--range", fa.range, "lo:hi");
  ft->add_option("--slot", fa.slot, "1-based slot index into --partition");
  ft->add_option("--partition", fa.partition, "partition.json");
  ft->add_option("--steps", fa.steps)->capture_default_str();
  ft->add_option("--seed", fa.seed, "Defaults to the training seed");
  ft->add_option("--lr", fa.lr, "Defaults to the training learning rate");
  ft->add_option("--n-per-t", fa.n_per_t)->capture_default_str();
  ft->add_option("--output-dir", fa.output_dir)->capture_default_str();

  AblateArgs aa;
  auto* abl = app.add_subcommand("ablate", "Replace x0 estimates with the truth on timestep ranges");
  abl->add_option("checkpoint", aa.checkpoint)->required();
  abl->add_option("--ranges", aa.ranges, "Comma list of lo:hi or none")->capture_default_str();
  abl->add_option("--trials", aa.trials)->capture_default_str();
  abl->add_option("--seed", aa.seed)->capture_default_str();
  abl->add_option("--head", aa.head, "d | v | a | auto")->capture_default_str();
  abl->add_option("--clamp", aa.clamp, "x0 clamp bound, <= 0 disables")->capture_default_str();
  abl->add_option("--output-dir", aa.output_dir)->capture_default_str();

  CoeffsArgs ca;
  auto* coeffs = app.add_subcommand("coeffs", "Posterior-mean coefficients per timestep");
  coeffs->add_option("source", ca.source, "Checkpoint or schedule manifest JSON");
  coeffs->add_option("--kind", ca.kind, "linear | cosine")->capture_default_str();
  coeffs->add_option("--T", ca.T)->capture_default_str();
  coeffs->add_option("--output-dir", ca.output_dir)->capture_default_str();

  SampleArgs xa;
  auto* sample = app.add_subcommand("sample", "Ancestral sampling and energy distance to held-out data");
  sample->add_option("checkpoint", xa.checkpoint)->required();
  sample->add_option("--n", xa.n)->capture_default_str();
  sample->add_option("--sampler-head,--head", xa.head, "d | v | a | auto")->capture_default_str();
  sample->add_option("--seed", xa.seed)->capture_default_str();
  sample->add_option("--clamp", xa.clamp)->capture_default_str();
  sample->add_option("--output-dir", xa.output_dir)->capture_default_str();

  DatasetArgs da;
  auto* dataset = app.add_subcommand("dataset", "Export a toy dataset as CSV");
  dataset->add_option("--kind", da.kind, "eight_gaussians | swiss_roll | checkerboard | two_moons")->capture_default_str();
  dataset->add_option("--n", da.n)->capture_default_str();
  dataset->add_option("--noise-std", da.noise_std)->capture_default_str();
  dataset->add_option("--seed", da.seed)->capture_default_str();
  dataset->add_option("--output-dir", da.output_dir)->capture_default_str();

  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  const std::vector<std::string> rest(args.begin() + 1, args.end());
  try {
    if (train->parsed()) {
      Manifest man("train", rest);
      cmd_train(ta, man, out);
    } else if (prof->parsed()) {
      Manifest man("profile", rest);
      cmd_profile(pa, man, out);
    } else if (slots->parsed()) {
      Manifest man("slots", rest);
      cmd_slots(sa, man, out);
    } else if (ft->parsed()) {
      Manifest man("finetune", rest);
      cmd_finetune(fa, man, out);
    } else if (abl->parsed()) {
      Manifest man("ablate", rest);
      cmd_ablate(aa, man, out);
    } else if (coeffs->parsed()) {
      Manifest man("coeffs", rest);
      cmd_coeffs(ca, man, out);
    } else if (sample->parsed()) {
      Manifest man("sample", rest);
      cmd_sample(xa, man, out);
    } else if (dataset->parsed()) {
      Manifest man("dataset", rest);
      cmd_dataset(da, man, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace difflab::cli
