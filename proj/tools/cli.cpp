#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "ssws/audio/mulaw.hpp"
#include "ssws/audio/wav.hpp"
#include "ssws/cond/features.hpp"
#include "ssws/eval/service.hpp"
#include "ssws/mushra/annotation.hpp"
#include "ssws/mushra/design.hpp"
#include "ssws/mushra/stats.hpp"
#include "ssws/synth/sampler.hpp"
#include "ssws/train/trainer.hpp"
#include "ssws/wavenet/model.hpp"

namespace ssws::cli {

namespace {

namespace fs = std::filesystem;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void write_file(const std::string& path, const std::string& text) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

// Codec text format: a "# sample_rate=N levels=L" line, then one bin per line.
struct CodecArgs {
  std::string in, out;
  int levels = audio::kDefaultLevels;
  int sample_rate = 0;
};

int codec_encode(const CodecArgs& a, std::ostream& out) {
  auto wav = audio::read_wav(a.in);
  audio::MulawCodec codec(a.levels);
  auto bins = codec.encode(wav.samples);
  std::ostringstream text;
  text << "# sample_rate=" << wav.sample_rate << " levels=" << a.levels << "\n";
  for (int b : bins) text << b << "\n";
  write_file(a.out, text.str());
  out << bins.size() << " samples encoded to " << a.out << "\n";
  return 0;
}

int codec_decode(const CodecArgs& a, bool levels_given, std::ostream& out) {
  std::ifstream in(a.in);
  if (!in) throw std::runtime_error("cannot open " + a.in);
  int rate = audio::kDefaultSampleRate, levels = audio::kDefaultLevels;
  std::vector<int> bins;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream h(line.substr(1));
      std::string kv;
      while (h >> kv) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        if (kv.substr(0, eq) == "sample_rate") rate = std::stoi(kv.substr(eq + 1));
        if (kv.substr(0, eq) == "levels") levels = std::stoi(kv.substr(eq + 1));
      }
      continue;
    }
    std::size_t used = 0;
    int v = std::stoi(line, &used);
    if (used != line.size()) throw std::runtime_error(a.in + ":" + std::to_string(n) + ": not an integer bin");
    bins.push_back(v);
  }
  if (a.sample_rate > 0) rate = a.sample_rate;
  if (levels_given) levels = a.levels;
  audio::MulawCodec codec(levels);
  audio::AudioBuffer wav;
  wav.sample_rate = rate;
  wav.samples = codec.decode(bins);
  audio::write_wav(a.out, wav);
  out << bins.size() << " samples decoded to " << a.out << "\n";
  return 0;
}

struct FeatureArgs {
  std::string audio, out;
  int hop = cond::kDefaultHopSize;
  std::uint64_t seed = 0;
};

int features(const FeatureArgs& a, std::ostream& out) {
  auto wav = audio::read_wav(a.audio);
  auto f = cond::generate_synthetic_features(wav, a.seed, a.hop);
  cond::write_features(a.out, f);
  out << f.frames << " frames written to " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  std::string config, manifest, out, loss_trace;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<double> learning_rate, anneal_factor;
  std::optional<std::size_t> batch_size;
};

int train_command(const TrainArgs& a, std::ostream& out) {
  util::KeyValueFile kv;
  if (!a.config.empty()) kv = util::KeyValueFile::load(a.config);
  std::set<std::string> known(wavenet::ModelConfig::keys().begin(), wavenet::ModelConfig::keys().end());
  known.insert(train::TrainRunConfig::keys().begin(), train::TrainRunConfig::keys().end());
  for (const auto& [k, v] : kv.values())
    if (!known.count(k)) throw std::runtime_error("unknown config key '" + k + "' in " + a.config);
  if (a.epochs) kv.set("epochs", std::to_string(*a.epochs));
  if (a.seed) kv.set("seed", std::to_string(*a.seed));
  if (a.batch_size) kv.set("batch_size", std::to_string(*a.batch_size));
  auto precise = [](double v) {
    std::ostringstream o;
    o << std::setprecision(17) << v;
    return o.str();
  };
  if (a.learning_rate) kv.set("learning_rate", precise(*a.learning_rate));
  if (a.anneal_factor) kv.set("anneal_factor", precise(*a.anneal_factor));

  auto model_config = wavenet::ModelConfig::from_keyvalue(kv);
  model_config.validate();
  auto run = train::TrainRunConfig::from_keyvalue(kv);
  run.checkpoint_path = a.out;

  std::vector<train::Utterance> data;
  for (const auto& e : train::read_manifest(a.manifest)) data.push_back(train::load_utterance(e, model_config, run.seed));

  wavenet::Model model(model_config, run.seed);
  auto result = train::train(model, data, run, [&](const train::EpochRecord& r) {
    out << "epoch " << r.epoch + 1 << " loss " << std::fixed << std::setprecision(4) << r.loss << " lr "
        << std::scientific << std::setprecision(4) << r.learning_rate << std::defaultfloat << "\n"
        << std::flush;
  });
  if (!a.loss_trace.empty()) train::write_loss_trace(a.loss_trace, result.trace);
  out << "teacher-forced loss " << std::fixed << std::setprecision(4) << train::evaluate(model, data, run.layout)
      << std::defaultfloat << "\n";
  out << "checkpoint " << a.out << "\n";
  return 0;
}

struct SynthArgs {
  std::string checkpoint, features, feature_text, audio, out, trace;
  std::uint64_t seed = 0;
  double temperature = 1.0;
};

int synth_command(const SynthArgs& a, std::ostream& out) {
  auto model = wavenet::Model::load(a.checkpoint);
  const int hop = model->config().hop_size;
  cond::FrameFeatures f;
  if (!a.features.empty())
    f = cond::read_features(a.features);
  else if (!a.feature_text.empty())
    f = cond::read_feature_text(a.feature_text, hop);
  else
    f = cond::generate_synthetic_features(audio::read_wav(a.audio), a.seed, hop);
  synth::SamplerConfig sc;
  sc.seed = a.seed;
  sc.temperature = a.temperature;
  auto result = synth::synthesize(f, *model, sc);
  audio::write_wav(a.out, result.audio);
  if (!a.trace.empty()) {
    std::string text = "sample,bin\n";
    for (std::size_t i = 0; i < result.bins.size(); ++i) text += std::to_string(i) + "," + std::to_string(result.bins[i]) + "\n";
    write_file(a.trace, text);
  }
  out << result.audio.samples.size() << " samples written to " << a.out << "\n";
  return 0;
}

struct DesignArgs {
  std::string plan, out;
  std::size_t listeners = 50, screens = 40, ratings = 10;
  std::uint64_t seed = 0;
};

int design_command(const DesignArgs& a, std::ostream& out) {
  auto plan = mushra::read_plan(a.plan);
  plan.listeners = a.listeners;
  plan.screens_per_listener = a.screens;
  plan.ratings_per_utterance = a.ratings;
  plan.seed = a.seed;
  auto assignment = mushra::build_assignment(plan);
  auto violations = mushra::validate_assignment(assignment);
  if (!violations.empty()) throw std::runtime_error("built assignment is invalid: " + violations.front());
  mushra::write_assignment(a.out, assignment);
  out << assignment.listeners.size() << " listeners x " << a.screens << " screens written to " << a.out << "\n";
  for (const auto& [domain, q] : mushra::domain_quota(plan)) out << "  " << domain << ": " << q << " per listener\n";
  return 0;
}

int validate_command(const std::string& assignment_path, const std::string& ratings_path, std::ostream& out) {
  auto a = mushra::read_assignment(assignment_path);
  auto v = mushra::validate_assignment(a);
  if (!ratings_path.empty()) {
    std::vector<mushra::RatingKey> keys;
    for (const auto& r : mushra::read_ratings_csv(ratings_path)) keys.push_back({r.listener_id, r.utterance_id, r.system});
    auto rv = mushra::validate_ratings(a, keys);
    v.insert(v.end(), rv.begin(), rv.end());
  }
  for (const auto& s : v) out << s << "\n";
  if (v.empty()) out << "valid\n";
  return v.empty() ? 0 : 1;
}

struct ServeArgs {
  std::string config, host, assignment, audio_root, log;
  int port = 0;
};

int serve_command(const ServeArgs& a) {
  eval::ServiceConfig c;
  if (!a.config.empty()) c = eval::load_service_config(a.config);
  if (!a.host.empty()) c.host = a.host;
  if (a.port > 0) c.port = a.port;
  if (!a.assignment.empty()) c.assignment_path = a.assignment;
  if (!a.audio_root.empty()) c.audio_root = a.audio_root;
  if (!a.log.empty()) c.log_path = a.log;
  return eval::serve(c);
}

int analyze_command(const std::string& ratings, double alpha, const std::string& systems, const std::string& out_dir,
                    std::ostream& out) {
  auto report = mushra::summarize(mushra::read_ratings_csv(ratings), alpha, split_list(systems));
  auto text = mushra::format_report(report);
  out << text;
  if (!out_dir.empty()) {
    write_file((fs::path(out_dir) / "report.txt").string(), text);
    write_file((fs::path(out_dir) / "summary.csv").string(), mushra::summary_csv(report));
    write_file((fs::path(out_dir) / "pairwise.csv").string(), mushra::pairwise_csv(report));
  }
  return 0;
}

struct ErrorsArgs {
  std::string flags, assignment, ratings, systems, category;
};

int errors_command(const ErrorsArgs& a, std::ostream& out) {
  auto flags = mushra::read_flags_csv(a.flags);
  std::vector<std::string> order = split_list(a.systems);
  std::map<std::string, std::string> domain_of;
  auto add_system = [&](const std::string& s) {
    if (std::find(order.begin(), order.end(), s) == order.end()) order.push_back(s);
  };
  if (!a.assignment.empty()) {
    auto as = mushra::read_assignment(a.assignment);
    for (const auto& s : as.plan.systems) add_system(s);
    for (const auto& u : as.plan.utterances) domain_of[u.id] = u.domain;
  }
  if (!a.ratings.empty())
    for (const auto& r : mushra::read_ratings_csv(a.ratings)) {
      add_system(r.system);
      domain_of[r.utterance_id] = r.domain;
    }
  for (const auto& f : flags) add_system(f.system);

  out << mushra::format_system_table(mushra::aggregate_by_system(flags, order), order);
  if (domain_of.empty()) return 0;
  mushra::DomainFilter filter;
  std::string label = "All errors";
  if (!a.category.empty()) {
    filter.any_category = false;
    filter.category = mushra::parse_category(a.category);
    label = mushra::to_string(filter.category);
    label[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(label[0])));
  }
  for (const auto& s : order) {
    filter.system = s;
    out << mushra::format_domain_table(mushra::aggregate_by_domain(flags, domain_of, filter), label + ", " + s)
        << "\n";
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sample-level neural vocoder and listening-test toolkit"};
  app.name(args.empty() ? "ssws" : fs::path(args[0]).filename().string());
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  CodecArgs codec_args;
  auto* codec = app.add_subcommand("codec", "mu-law encode or decode audio");
  codec->require_subcommand(1);
  auto* encode = codec->add_subcommand("encode", "WAV to a text file of bins");
  encode->add_option("--in", codec_args.in, "Input WAV")->required()->check(CLI::ExistingFile);
  encode->add_option("--out", codec_args.out, "Output bin file")->required();
  encode->add_option("--levels", codec_args.levels, "Quantization levels")->check(CLI::Range(2, 1 << 16));
  auto* decode = codec->add_subcommand("decode", "Text file of bins to WAV");
  decode->add_option("--in", codec_args.in, "Input bin file")->required()->check(CLI::ExistingFile);
  decode->add_option("--out", codec_args.out, "Output WAV")->required();
  auto* decode_levels =
      decode->add_option("--levels", codec_args.levels, "Quantization levels (default: from the file header)")
          ->check(CLI::Range(2, 1 << 16));
  decode->add_option("--sample-rate", codec_args.sample_rate, "Sample rate; 0 uses the file header")
      ->check(CLI::NonNegativeNumber);

  FeatureArgs feature_args;
  auto* feat = app.add_subcommand("features", "Derive synthetic frame features from a WAV");
  feat->add_option("--audio", feature_args.audio, "Input WAV")->required()->check(CLI::ExistingFile);
  feat->add_option("--out", feature_args.out, "Output feature file")->required();
  feat->add_option("--hop", feature_args.hop, "Samples per frame")->check(CLI::PositiveNumber);
  feat->add_option("--seed", feature_args.seed, "Seed for the synthetic linguistic columns");

  TrainArgs train_args;
  auto* tr = app.add_subcommand("train", "Train a model; flags override config keys");
  tr->add_option("--config", train_args.config, "key = value file with model and training keys")
      ->check(CLI::ExistingFile);
  tr->add_option("--manifest", train_args.manifest, "TSV: utterance_id, domain, audio, features")
      ->required()
      ->check(CLI::ExistingFile);
  tr->add_option("--out", train_args.out, "Checkpoint written after every epoch")->required();
  tr->add_option("--loss-trace", train_args.loss_trace, "Per-epoch loss CSV: epoch,loss,learning_rate");
  tr->add_option("--epochs", train_args.epochs, "Epochs (config default 1)")->check(CLI::PositiveNumber);
  tr->add_option("--seed", train_args.seed, "Initialization, shuffling and feature seed (default 0)");
  tr->add_option("--learning-rate", train_args.learning_rate, "Initial rate (default 5e-4)")
      ->check(CLI::PositiveNumber);
  tr->add_option("--anneal-factor", train_args.anneal_factor, "Per-epoch rate factor (default 0.836)")
      ->check(CLI::Range(0.0, 1.0));
  tr->add_option("--batch-size", train_args.batch_size, "Chunks per step (default 1)")->check(CLI::PositiveNumber);

  SynthArgs synth_args;
  auto* sy = app.add_subcommand("synth", "Synthesize audio from features");
  sy->add_option("--checkpoint", synth_args.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  auto* sf = sy->add_option("--features", synth_args.features, "Binary feature file")->check(CLI::ExistingFile);
  auto* st = sy->add_option("--feature-text", synth_args.feature_text, "Whitespace feature table, 88 columns")
                 ->check(CLI::ExistingFile);
  auto* sa = sy->add_option("--audio", synth_args.audio, "Derive synthetic features from this WAV")
                 ->check(CLI::ExistingFile);
  sf->excludes(st)->excludes(sa);
  st->excludes(sa);
  sy->add_option("--out", synth_args.out, "Output WAV")->required();
  sy->add_option("--trace", synth_args.trace, "Per-sample bin trace CSV");
  sy->add_option("--seed", synth_args.seed, "Sampling seed");
  sy->add_option("--temperature", synth_args.temperature, "Softmax temperature")->check(CLI::PositiveNumber);

  DesignArgs design_args;
  auto* de = app.add_subcommand("design", "Build a balanced listening-test assignment");
  de->add_option("--plan", design_args.plan, "TSV: utterance_id, domain, one audio column per system")
      ->required()
      ->check(CLI::ExistingFile);
  de->add_option("--out", design_args.out, "Assignment JSON")->required();
  de->add_option("--listeners", design_args.listeners, "Listeners")->check(CLI::PositiveNumber);
  de->add_option("--screens", design_args.screens, "Screens per listener")->check(CLI::PositiveNumber);
  de->add_option("--ratings", design_args.ratings, "Ratings per utterance")->check(CLI::PositiveNumber);
  de->add_option("--seed", design_args.seed, "Design seed");

  std::string validate_assignment, validate_ratings;
  auto* va = app.add_subcommand("validate", "Check an assignment, and optionally a ratings export, for violations");
  va->add_option("--assignment", validate_assignment, "Assignment JSON")->required()->check(CLI::ExistingFile);
  va->add_option("--ratings", validate_ratings, "Ratings CSV")->check(CLI::ExistingFile);

  ServeArgs serve_args;
  auto* se = app.add_subcommand("serve", "Run the listening-test service; flags override the config file");
  se->add_option("--config", serve_args.config, "key = value file: host, port, assignment, audio_root, log")
      ->check(CLI::ExistingFile);
  se->add_option("--host", serve_args.host, "Bind address (default 127.0.0.1)");
  se->add_option("--port", serve_args.port, "Port (default 8080)")->check(CLI::Range(0, 65535));
  se->add_option("--assignment", serve_args.assignment, "Assignment JSON");
  se->add_option("--audio-root", serve_args.audio_root, "Directory audio paths are relative to (default .)");
  se->add_option("--log", serve_args.log, "Record log (default ratings.jsonl)");

  std::string analyze_ratings, analyze_systems, analyze_out;
  double alpha = 0.01;
  auto* an = app.add_subcommand("analyze", "Score and rank tables with Holm-corrected pairwise tests");
  an->add_option("--ratings", analyze_ratings, "Ratings CSV")->required();
  an->add_option("--alpha", alpha, "Family-wise significance level")->check(CLI::Range(0.0, 1.0));
  an->add_option("--systems", analyze_systems, "Comma-separated system order (default: first appearance)");
  an->add_option("--out-dir", analyze_out, "Also write report.txt, summary.csv and pairwise.csv here");

  ErrorsArgs errors_args;
  auto* er = app.add_subcommand("errors-report", "Error-flag counts per system and per domain");
  er->add_option("--flags", errors_args.flags, "Flags CSV")->required();
  er->add_option("--assignment", errors_args.assignment, "Assignment JSON supplying utterance domains")
      ->check(CLI::ExistingFile);
  er->add_option("--ratings", errors_args.ratings, "Ratings CSV supplying utterance domains")
      ->check(CLI::ExistingFile);
  er->add_option("--systems", errors_args.systems, "Comma-separated system order");
  er->add_option("--category", errors_args.category, "Restrict the per-domain tables to one category")
      ->check(CLI::Validator(
          [](std::string& s) {
            try {
              mushra::parse_category(s);
              return std::string();
            } catch (const std::exception& e) {
              return std::string(e.what());
            }
          },
          "CATEGORY"));

  std::vector<char*> argv;
  std::vector<std::string> storage(args.begin(), args.end());
  if (storage.empty()) storage.push_back("ssws");
  for (auto& s : storage) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (*encode) return codec_encode(codec_args, out);
    if (*decode) return codec_decode(codec_args, decode_levels->count() > 0, out);
    if (*feat) return features(feature_args, out);
    if (*tr) return train_command(train_args, out);
    if (*sy) {
      if (synth_args.features.empty() && synth_args.feature_text.empty() && synth_args.audio.empty()) {
        err << "synth: one of --features, --feature-text or --audio is required\n";
        return 2;
      }
      return synth_command(synth_args, out);
    }
    if (*de) return design_command(design_args, out);
    if (*va) return validate_command(validate_assignment, validate_ratings, out);
    if (*se) return serve_command(serve_args);
    if (*an) return analyze_command(analyze_ratings, alpha, analyze_systems, analyze_out, out);
    if (*er) return errors_command(errors_args, out);
  } catch (const std::exception& e) {
    err << app.get_name() << ": " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace ssws::cli
