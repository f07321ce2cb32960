#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "replaysim/replaysim.hpp"

namespace {

using json = nlohmann::json;
using namespace replaysim;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitCorpus = 2;
constexpr int kExitGeneration = 3;
constexpr int kExitUnmatched = 4;

constexpr const char* kCorpusRootEnv = "REPLAYSIM_CORPUS_ROOT";

void emit(const json& j) { std::cout << j.dump(2) << '\n'; }

std::vector<double> parse_list(const std::string& text, std::size_t expected, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(parse_double(item));
    } catch (const FormatError&) {
      throw ConfigError(flag + ": '" + item + "' is not a number");
    }
  }
  if (expected && out.size() != expected)
    throw ConfigError(flag + " expects " + std::to_string(expected) + " comma-separated values");
  return out;
}

Vec3 parse_vec(const std::string& text, const std::string& flag) {
  const auto v = parse_list(text, 3, flag);
  return {v[0], v[1], v[2]};
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateArgs {
  std::string config;
  std::string out;
  std::string speech_dir, noise_dir, grids_dir;
  std::string noise_mode, spoofing_mode, genuine_room, format;
  std::vector<int> sample_rates;
  std::uint64_t seed = 0;
  std::size_t utterances = 0;
  std::size_t jobs = 0;
};

int run_generate(const GenerateArgs& a, CLI::App& cmd) {
  DatasetConfig base;
  if (const char* root = std::getenv(kCorpusRootEnv); root && *root) {
    const std::filesystem::path r(root);
    base.speech_dir = (r / "speech").string();
    base.noise_dir = (r / "noise").string();
    base.grids_dir = (r / "grids").string();
  }
  DatasetConfig cfg = a.config.empty() ? base : load_config(a.config, base);

  // Flags override the file; every override is echoed in the snapshot except
  // execution-only settings.
  json overrides = json::object();
  auto given = [&](const char* flag) { return cmd.count(flag) > 0; };
  if (given("--speech-dir")) overrides["speech_dir"] = cfg.speech_dir = a.speech_dir;
  if (given("--noise-dir")) overrides["noise_dir"] = cfg.noise_dir = a.noise_dir;
  if (given("--grids-dir")) overrides["grids_dir"] = cfg.grids_dir = a.grids_dir;
  if (given("--seed")) overrides["seed"] = cfg.seed = a.seed;
  if (given("--utterances")) overrides["utterances"] = cfg.utterances = a.utterances;
  if (given("--noise-mode")) {
    cfg.noise_mode = parse_noise_mode(a.noise_mode);
    overrides["noise_mode"] = to_string(cfg.noise_mode);
  }
  if (given("--spoofing-mode")) {
    cfg.spoofing_mode = parse_spoofing_mode(a.spoofing_mode);
    overrides["spoofing_mode"] = to_string(cfg.spoofing_mode);
  }
  if (given("--genuine-room")) {
    cfg.genuine_room = parse_genuine_room(a.genuine_room);
    overrides["genuine_room"] = to_string(cfg.genuine_room);
  }
  if (given("--format")) {
    cfg.output_format = parse_sample_format(a.format);
    overrides["output_format"] = to_string(cfg.output_format);
  }
  if (given("--sample-rates")) overrides["sample_rates"] = cfg.sample_rates = a.sample_rates;
  if (given("--out")) cfg.out_dir = a.out;
  if (given("--jobs")) cfg.jobs = a.jobs;
  if (cfg.out_dir.empty()) throw ConfigError("no output directory (use --out or out_dir)");
  validate(cfg);

  std::cerr << "generating " << cfg.utterances << " utterances into " << cfg.out_dir << " with " << cfg.jobs
            << " job(s)\n";
  const auto result = generate_dataset(cfg, stderr_sink(), overrides);
  emit({{"out_dir", cfg.out_dir},
        {"manifest", (std::filesystem::path(cfg.out_dir) / "manifest.csv").string()},
        {"genuine", result.genuine},
        {"replay", result.replay},
        {"files", result.manifest.rows.size()},
        {"clipped_samples", result.clipped}});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// rir
// ---------------------------------------------------------------------------

struct RirArgs {
  std::string room = "4,5,3";
  std::string absorption = "0.3";
  std::string source = "1,1,1.5";
  std::string mic = "3,4,1.5";
  std::string grid;
  std::string out;
  int max_order = kDefaultMaxOrder;
  int sample_rate = 48000;
  double speed_of_sound = kSpeedOfSound;
  std::string format = "float32";
};

int run_rir(const RirArgs& a) {
  RoomSpec room;
  const auto dims = parse_list(a.room, 3, "--room");
  room.width = dims[0];
  room.length = dims[1];
  room.height = dims[2];
  const auto abs = parse_list(a.absorption, 0, "--absorption");
  if (abs.size() == 1)
    room.absorption.fill(abs[0]);
  else if (abs.size() == 6)
    std::copy(abs.begin(), abs.end(), room.absorption.begin());
  else
    throw ConfigError("--absorption expects one value or six (x0,x1,y0,y1,floor,ceiling)");
  room.speed_of_sound = a.speed_of_sound;
  const Vec3 src = parse_vec(a.source, "--source");
  const Vec3 mic = parse_vec(a.mic, "--mic");
  if (a.max_order < 0) throw ConfigError("--max-order must be non-negative");
  try {
    validate(room);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (!room.contains(src, 0.0) || !room.contains(mic, 0.0)) throw ConfigError("source and mic must lie inside the room");

  DirectivityPattern pattern = DirectivityPattern::omni();
  if (!a.grid.empty())
    pattern = DirectivityPattern::measured(std::make_shared<const MeasuredGrid>(load_grid(a.grid, a.sample_rate)),
                                           Direction::from_vector(mic - src));
  RenderOptions opt;
  opt.sample_rate = a.sample_rate;
  opt.speed_of_sound = a.speed_of_sound;
  const auto paths = enumerate_images(room, src, a.max_order);
  const auto rir = render_rir(paths, mic, pattern, DirectivityPattern::omni(), opt);

  json t60 = nullptr;
  try {
    t60 = rt60_estimate(rir);
  } catch (const NumericalError& e) {
    std::cerr << "warning: " << e.what() << '\n';
  }
  if (!a.out.empty()) {
    MultichannelSignal s;
    s.sample_rate = a.sample_rate;
    s.channels.push_back(rir.taps);
    write_wav(a.out, WavFile::from(s, parse_sample_format(a.format)));
  }
  std::size_t nonzero = 0;
  for (double v : rir.taps) nonzero += v != 0.0;
  emit({{"sample_rate", a.sample_rate},
        {"length", rir.taps.size()},
        {"nonzero_taps", nonzero},
        {"image_sources", paths.size()},
        {"direct_delay_samples", direct_delay_samples(src, mic, a.sample_rate, a.speed_of_sound)},
        {"rt60_s", t60},
        {"out", a.out.empty() ? json(nullptr) : json(a.out)}});
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct ScoreLine {
  std::string trial_id;
  double score;
};

std::vector<ScoreLine> read_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open score file " + path);
  std::vector<ScoreLine> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    for (auto& c : line)
      if (c == ',' || c == '\t' || c == ';') c = ' ';
    std::istringstream ss(line);
    std::string id, score;
    if (!(ss >> id) || id.front() == '#') continue;
    if (!(ss >> score)) throw ConfigError(path + ":" + std::to_string(lineno) + ": missing score");
    double v;
    try {
      v = parse_double(score);
    } catch (const FormatError&) {
      if (lineno == 1) continue;  // header
      throw ConfigError(path + ":" + std::to_string(lineno) + ": bad score '" + score + "'");
    }
    if (!std::isfinite(v)) throw ConfigError(path + ":" + std::to_string(lineno) + ": non-finite score");
    out.push_back({id, v});
  }
  return out;
}

int run_eval(const std::string& manifest_path, const std::vector<std::string>& score_files) {
  Manifest manifest;
  try {
    manifest = read_manifest(manifest_path);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  std::map<std::string, TrialLabel> labels;
  for (const auto& r : manifest.rows) labels[r.at("trial_id")] = parse_label(r.at("label"));

  json runs = json::array();
  std::vector<double> eers;
  std::vector<std::string> unmatched;
  for (const auto& file : score_files) {
    std::vector<ScoredTrial> trials;
    for (const auto& s : read_scores(file)) {
      const auto it = labels.find(s.trial_id);
      if (it == labels.end())
        unmatched.push_back(file + ": " + s.trial_id);
      else
        trials.push_back({s.score, it->second});
    }
    if (!unmatched.empty()) continue;
    EerReport rep;
    try {
      rep = compute_eer(trials);
    } catch (const InvalidArgument& e) {
      throw ConfigError(file + ": " + e.what());
    }
    eers.push_back(rep.eer);
    runs.push_back({{"scores", file},
                    {"eer", rep.eer},
                    {"threshold", rep.threshold},
                    {"n_genuine", rep.n_genuine},
                    {"n_replay", rep.n_replay}});
  }
  if (!unmatched.empty()) {
    std::cerr << "error: " << unmatched.size() << " scored trial(s) not in manifest:\n";
    for (const auto& u : unmatched) std::cerr << "  " << u << '\n';
    return kExitUnmatched;
  }
  json report = {{"manifest", manifest_path}, {"runs", runs}};
  if (eers.size() >= 2) {
    const auto ci = confidence_interval(eers);
    report["aggregate"] = {{"n", eers.size()}, {"mean", ci.mean}, {"half_width", ci.half_width}, {"level", 0.95}};
  }
  emit(report);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// inspect
// ---------------------------------------------------------------------------

int run_inspect(const std::string& manifest_path) {
  Manifest m;
  try {
    m = read_manifest(manifest_path);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  std::map<std::string, std::size_t> by_label, by_rate, by_speaker, by_noise;
  std::set<std::string> utterances;
  double snr_min = 1e300, snr_max = -1e300, snr_sum = 0.0;
  std::size_t clipped = 0, snr_count = 0;
  for (const auto& r : m.rows) {
    auto get = [&](const char* k) {
      const auto it = r.find(k);
      return it == r.end() ? std::string() : it->second;
    };
    ++by_label[get("label")];
    ++by_rate[get("sample_rate")];
    if (get("label") == "replay") ++by_speaker[get("loudspeaker_id")];
    ++by_noise[get("noise_mode")];
    utterances.insert(get("utterance"));
    if (!get("clip_count").empty()) clipped += parse_u64(get("clip_count"));
    if (!get("snr_db").empty()) {
      const double v = parse_double(get("snr_db"));
      snr_min = std::min(snr_min, v);
      snr_max = std::max(snr_max, v);
      snr_sum += v;
      ++snr_count;
    }
  }
  json j = {{"manifest", manifest_path},
            {"rows", m.rows.size()},
            {"utterances", utterances.size()},
            {"labels", by_label},
            {"sample_rates", by_rate},
            {"loudspeakers", by_speaker},
            {"noise_modes", by_noise},
            {"clipped_samples", clipped}};
  if (snr_count) j["snr_db"] = {{"min", snr_min}, {"max", snr_max}, {"mean", snr_sum / static_cast<double>(snr_count)}};
  emit(j);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Replay-attack acoustic simulation and evaluation"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate a genuine/replay dataset");
  g->add_option("--config", gen.config, "JSON config file");
  g->add_option("--out", gen.out, "Output directory");
  g->add_option("--speech-dir", gen.speech_dir, "Speech corpus directory");
  g->add_option("--noise-dir", gen.noise_dir, "Noise corpus directory");
  g->add_option("--grids-dir", gen.grids_dir, "Loudspeaker directivity grid directory");
  g->add_option("--seed", gen.seed, "Master seed");
  g->add_option("--utterances", gen.utterances, "Number of utterances");
  g->add_option("--noise-mode", gen.noise_mode, "omni or diffuse");
  g->add_option("--spoofing-mode", gen.spoofing_mode, "reverberant or anechoic");
  g->add_option("--genuine-room", gen.genuine_room, "env_a or env_b");
  g->add_option("--format", gen.format, "pcm16, pcm24 or float32");
  g->add_option("--sample-rates", gen.sample_rates, "Output rates; the first must be the engine rate")->delimiter(',');
  g->add_option("--jobs", gen.jobs, "Worker threads (outputs do not depend on it)");
  g->footer(std::string("Corpus directories default to $") + kCorpusRootEnv + "/{speech,noise,grids}.");

  RirArgs rir;
  auto* r = app.add_subcommand("rir", "Render one room impulse response and report its T60");
  r->add_option("--room", rir.room, "Room dimensions W,L,H in metres")->capture_default_str();
  r->add_option("--absorption", rir.absorption, "Energy absorption, one value or six")->capture_default_str();
  r->add_option("--source", rir.source, "Source position x,y,z")->capture_default_str();
  r->add_option("--mic", rir.mic, "Microphone position x,y,z")->capture_default_str();
  r->add_option("--max-order", rir.max_order, "Maximum reflection order")->capture_default_str();
  r->add_option("--fs", rir.sample_rate, "Sample rate")->capture_default_str();
  r->add_option("--speed-of-sound", rir.speed_of_sound, "Speed of sound in m/s")->capture_default_str();
  r->add_option("--grid", rir.grid, "Source directivity grid (aimed at the mic); omni if absent");
  r->add_option("--out", rir.out, "Write the RIR to this WAV file");
  r->add_option("--format", rir.format, "WAV sample format")->capture_default_str();

  std::string eval_manifest;
  std::vector<std::string> eval_scores;
  auto* e = app.add_subcommand("eval", "Compute EER from score files joined with a manifest");
  e->add_option("--manifest", eval_manifest, "Dataset manifest.csv")->required();
  e->add_option("--scores", eval_scores, "Score files (trial_id, score); several give a 95% CI")->required();

  std::string inspect_manifest;
  auto* i = app.add_subcommand("inspect", "Summarize a dataset manifest");
  i->add_option("manifest", inspect_manifest, "Dataset manifest.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return kExitConfig;
  }

  try {
    if (*g) return run_generate(gen, *g);
    if (*r) return run_rir(rir);
    if (*e) return run_eval(eval_manifest, eval_scores);
    if (*i) return run_inspect(inspect_manifest);
  } catch (const ConfigError& ex) {
    std::cerr << "config error: " << ex.what() << '\n';
    return kExitConfig;
  } catch (const CorpusError& ex) {
    std::cerr << "corpus error: " << ex.what() << '\n';
    return kExitCorpus;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitGeneration;
  }
  return kExitOk;
}
