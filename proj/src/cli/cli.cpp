#include "keyformer/cli/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "keyformer/core/error.hpp"
#include "keyformer/data/feature_io.hpp"
#include "keyformer/data/manifest.hpp"
#include "keyformer/data/raw_log.hpp"
#include "keyformer/evaluation/eer.hpp"
#include "keyformer/evaluation/embeddings.hpp"
#include "keyformer/service/server.hpp"
#include "keyformer/training/trainer.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace cli {

namespace {

namespace fs = std::filesystem;

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string model;
  std::string data;
  std::string out;
  std::size_t threads = 0;
};

std::string percent(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.2f%%", 100.0 * v);
  return buffer;
}

std::string real(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.6g", v);
  return buffer;
}

const std::string& require(const std::string& value, const char* flag) {
  if (value.empty()) throw ContractError(std::string("missing required option ") + flag);
  return value;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

/// Sequences of the data directory restricted to one split part.
std::vector<data::FeatureSequence> load_subset(const fs::path& dir, const std::string& subset) {
  auto sequences = data::read_features(dir / data::kFeaturesFile);
  if (subset == "all") return sequences;
  const data::Manifest manifest = data::read_manifest(dir / data::kManifestFile);
  if (!manifest.split) {
    throw ContractError(dir.string() + " has no subject split; run `keyformer split` first or pass --subset all");
  }
  const data::DatasetSplit& split = *manifest.split;
  if (subset == "train") return data::select_subjects(sequences, split.train);
  if (subset == "validation") return data::select_subjects(sequences, split.validation);
  if (subset == "test") return data::select_subjects(sequences, split.test);
  throw ConfigError("unknown subset '" + subset + "' (train | validation | test | all)");
}

model::ModelConfig model_config_named(const std::string& name) {
  if (name == "full") return {};
  if (name == "reduced") return model::ModelConfig::reduced();
  if (name == "tiny") return model::ModelConfig::tiny();
  return read_json(name).get<model::ModelConfig>();
}

data::Session read_session_file(const fs::path& path, std::string& user_id) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open session file " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  // A bare user id is allowed to be absent from the file.
  if (!j.contains("user_id") && !user_id.empty()) j["user_id"] = user_id;
  service::SessionRequest request;
  try {
    request = service::parse_session_request(j.dump());
  } catch (const service::RequestError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  if (user_id.empty()) user_id = request.user_id;
  data::Session session;
  session.subject_id = user_id;
  session.events = std::move(request.events);
  return session;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Keystroke-dynamics authentication: data preparation, training, evaluation and "
               "verification service",
               "keyformer"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config, "JSON config file");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--model", g.model, "Checkpoint path");
  app.add_option("--data", g.data, "Data directory");
  app.add_option("--out", g.out, "Output path");
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse a raw keystroke log into a data directory");
  std::string raw_input;
  std::string schema_path;
  std::size_t ingest_length = data::kDefaultSequenceLength;
  ingest->add_option("--input", raw_input, "Raw log (tab or comma delimited)")->required();
  ingest->add_option("--schema", schema_path, "Column-name mapping JSON");
  ingest->add_option("--length", ingest_length, "Sequence length L");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic data directory");
  std::size_t subjects = 60, sessions = 15, events = 70;
  synth->add_option("--subjects", subjects)->check(CLI::PositiveNumber);
  synth->add_option("--sessions", sessions)->check(CLI::PositiveNumber);
  synth->add_option("--events", events)->check(CLI::PositiveNumber);
  std::size_t synth_length = data::kDefaultSequenceLength;
  synth->add_option("--length", synth_length, "Sequence length L")->check(CLI::PositiveNumber);

  // split
  auto* split = app.add_subcommand("split", "Assign subjects to train/validation/test");
  data::SplitSizes sizes;
  std::string train_list, validation_list, test_list;
  split->add_option("--train", sizes.train, "Training subject count");
  split->add_option("--validation", sizes.validation, "Validation subject count");
  split->add_option("--test", sizes.test, "Test subject count");
  split->add_option("--train-list", train_list, "File with one training subject id per line");
  split->add_option("--validation-list", validation_list);
  split->add_option("--test-list", test_list);

  // train
  auto* train = app.add_subcommand("train", "Train a model with triplet loss");
  std::string architecture = "full";
  std::optional<std::size_t> epochs, batches, batch_size, train_eval;
  std::optional<double> learning_rate, margin;
  bool resume = false;
  train->add_option("--architecture", architecture, "full | reduced | tiny | model-config JSON");
  train->add_option("--epochs", epochs);
  train->add_option("--batches", batches, "Batches per epoch");
  train->add_option("--batch-size", batch_size);
  train->add_option("--lr", learning_rate, "Learning rate");
  train->add_option("--margin", margin, "Triplet margin");
  train->add_option("--train-eval-subjects", train_eval, "Training subjects scored each epoch");
  train->add_flag("--resume", resume, "Continue from <out>/last.ckpt");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a split and report EERs");
  std::vector<std::size_t> enrolments{5};
  std::string policy_text = "both";
  std::string subset = "test";
  bool calibrate = false;
  std::size_t det_points = 1000;
  evaluate->add_option("--E", enrolments, "Enrolment session counts")->delimiter(',');
  evaluate->add_option("--policy", policy_text, "average | global | both");
  evaluate->add_option("--subset", subset, "train | validation | test | all");
  evaluate->add_option("--det-points", det_points);
  evaluate->add_flag("--calibrate", calibrate,
                     "Store the Global-EER threshold of the first E in the checkpoint");

  // embed
  auto* embed = app.add_subcommand("embed", "Export session embeddings as CSV");
  std::string embed_subset = "test";
  embed->add_option("--subset", embed_subset, "train | validation | test | all");

  // enroll / verify
  auto* enroll = app.add_subcommand("enroll", "Add a session to a user's template");
  auto* verify = app.add_subcommand("verify", "Verify a session against a user's template");
  std::string store_path, user_id, session_path, calibration_scores;
  std::optional<double> fixed_threshold;
  for (CLI::App* sub : {enroll, verify}) {
    sub->add_option("--store", store_path, "Template store file")->required();
    sub->add_option("--user", user_id, "User id (defaults to the session file's)");
    sub->add_option("--session", session_path, "Session JSON {user_id?, events:[...]}");
  }
  enroll->add_option("--threshold", fixed_threshold, "Fix the user's decision threshold");
  enroll->add_option("--calibrate", calibration_scores,
                     "Scores file; sets the user's threshold at their EER point");
  std::string verify_policy = "global";
  verify->add_option("--threshold-policy", verify_policy, "global | per_user");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP verification service");
  std::string bind, serve_store;
  serve->add_option("--bind", bind, "host:port");
  serve->add_option("--store", serve_store, "Template store file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    const std::uint64_t seed = g.seed.value_or(0);

    if (*ingest) {
      const fs::path dir = require(g.out, "--out");
      const data::LogSchema schema = schema_path.empty() ? data::LogSchema{} : data::load_schema(schema_path);
      const data::ParseReport report = data::parse_raw_log(raw_input, schema);
      std::vector<data::FeatureSequence> features;
      for (const data::Session& s : report.sessions) features.push_back(data::extract_features(s, ingest_length));
      fs::create_directories(dir);
      data::write_features(dir / data::kFeaturesFile, features);
      data::Manifest manifest = data::read_manifest(dir / data::kManifestFile);
      manifest.sequence_length = ingest_length;
      data::write_manifest(dir / data::kManifestFile, manifest);
      out << "ingested " << report.sessions.size() << " sessions from " << report.rows << " rows ("
          << report.skipped_rows << " skipped) into " << dir.string() << '\n';
      return kExitOk;
    }

    if (*synth) {
      const fs::path dir = require(g.out, "--out");
      const data::SyntheticDataset dataset = data::generate_synthetic(subjects, sessions, events, seed);
      fs::create_directories(dir);
      data::write_raw_log(dir / data::kRawLogFile, dataset.sessions);
      std::vector<data::FeatureSequence> features;
      for (const data::Session& s : dataset.sessions) features.push_back(data::extract_features(s, synth_length));
      data::write_features(dir / data::kFeaturesFile, features);
      data::Manifest manifest;
      manifest.sequence_length = synth_length;
      manifest.profiles = dataset.profiles;
      manifest.synthetic_seed = seed;
      data::write_manifest(dir / data::kManifestFile, manifest);
      out << "wrote " << subjects << " subjects x " << sessions << " sessions to " << dir.string() << '\n';
      return kExitOk;
    }

    if (*split) {
      const fs::path dir = require(g.data, "--data");
      data::Manifest manifest = data::read_manifest(dir / data::kManifestFile);
      if (!train_list.empty() || !validation_list.empty() || !test_list.empty()) {
        if (train_list.empty() || validation_list.empty() || test_list.empty()) {
          throw ContractError("--train-list, --validation-list and --test-list go together");
        }
        manifest.split = data::split_from_lists(train_list, validation_list, test_list);
        manifest.split_seed.reset();
      } else {
        const auto features = data::read_features(dir / data::kFeaturesFile);
        std::vector<std::string> ids;
        for (const data::SubjectGroup& group : data::group_by_subject(features)) ids.push_back(group.subject_id);
        core::Rng rng(seed);
        manifest.split = data::split_subjects(ids, sizes, rng);
        manifest.split_seed = seed;
      }
      data::write_manifest(dir / data::kManifestFile, manifest);
      out << "split: " << manifest.split->train.size() << " train, "
          << manifest.split->validation.size() << " validation, " << manifest.split->test.size()
          << " test\n";
      return kExitOk;
    }

    if (*train) {
      const fs::path dir = require(g.data, "--data");
      const fs::path run_dir = g.out.empty() ? fs::path("run") : fs::path(g.out);
      model::ModelConfig model_config = model_config_named(architecture);
      training::TrainConfig train_config;
      if (!g.config.empty()) {
        const nlohmann::json j = read_json(g.config);
        if (j.contains("model")) model_config = j.at("model").get<model::ModelConfig>();
        if (j.contains("train")) train_config = j.at("train").get<training::TrainConfig>();
      }
      if (g.seed) train_config.seed = *g.seed;
      if (epochs) train_config.epochs = *epochs;
      if (batches) train_config.batches_per_epoch = *batches;
      if (batch_size) train_config.batch_size = *batch_size;
      if (learning_rate) train_config.learning_rate = *learning_rate;
      if (margin) train_config.margin = *margin;
      if (train_eval) train_config.train_eval_subjects = *train_eval;

      const auto train_set = load_subset(dir, "train");
      const auto validation_set = load_subset(dir, "validation");
      fs::create_directories(run_dir);
      training::TrainOptions options;
      options.best_path = run_dir / "model.ckpt";
      options.last_path = run_dir / "last.ckpt";
      options.log_path = run_dir / "train_log.jsonl";
      options.threads = g.threads;
      options.on_epoch = [&out](const training::EpochLog& e) {
        out << "epoch " << e.epoch << " loss " << real(e.mean_loss) << " val_eer "
            << percent(e.val_eer) << '\n';
      };
      training::Checkpoint start;
      if (resume) {
        start = training::load_checkpoint(*options.last_path, model_config);
        start.train_config.epochs = train_config.epochs;
      } else {
        start = training::initial_checkpoint(model_config, train_config);
      }
      const training::TrainResult result = training::train(std::move(start), train_set, validation_set, options);
      if (result.log.empty() && !fs::exists(*options.best_path)) {
        training::save_checkpoint(result.best, *options.best_path);
      }
      out << "best checkpoint " << options.best_path->string() << " (epoch " << result.best.epoch
          << ")\n";
      return kExitOk;
    }

    if (*evaluate) {
      const fs::path model_path = require(g.model, "--model");
      const fs::path dir = require(g.data, "--data");
      const fs::path out_dir = g.out.empty() ? fs::path(".") : fs::path(g.out);
      const evaluation::ThresholdPolicy policy = evaluation::parse_policy(policy_text);
      training::Checkpoint cp = training::load_checkpoint(model_path);
      const auto sequences = load_subset(dir, subset);
      const auto embedded = evaluation::embed_subjects(cp.weights, cp.model_config, sequences, g.threads);
      fs::create_directories(out_dir);
      std::optional<double> calibrated;
      for (std::size_t e : enrolments) {
        const auto scores = evaluation::build_scores(embedded, e, g.threads);
        const std::string tag = "E" + std::to_string(e);
        evaluation::write_scores(out_dir / ("scores_" + tag + ".jsonl"), scores, e);
        if (policy != evaluation::ThresholdPolicy::kGlobal) {
          const auto r = evaluation::average_eer(scores);
          out << tag << " Average EER " << percent(r.eer) << " (mean threshold " << real(r.threshold) << ")"
              << (r.inverted_polarity ? " [inverted polarity]" : "") << '\n';
        }
        const auto global = evaluation::global_eer(scores);
        if (policy != evaluation::ThresholdPolicy::kAverage) {
          out << tag << " Global EER " << percent(global.eer) << " (threshold " << real(global.threshold) << ")"
              << (global.inverted_polarity ? " [inverted polarity]" : "") << '\n';
        }
        std::vector<double> genuine, impostor;
        for (const auto& s : scores) {
          genuine.insert(genuine.end(), s.genuine.begin(), s.genuine.end());
          impostor.insert(impostor.end(), s.impostor.begin(), s.impostor.end());
        }
        evaluation::write_det_curve(out_dir / ("det_" + tag + ".csv"),
                                    evaluation::det_curve(genuine, impostor, det_points));
        if (!calibrated) calibrated = global.threshold;
      }
      if (calibrate && calibrated) {
        cp.global_threshold = calibrated;
        training::save_checkpoint(cp, model_path);
        out << "stored global threshold " << real(*calibrated) << " in " << model_path.string() << '\n';
      }
      return kExitOk;
    }

    if (*embed) {
      const fs::path model_path = require(g.model, "--model");
      const fs::path dir = require(g.data, "--data");
      const fs::path target = g.out.empty() ? fs::path("embeddings.csv") : fs::path(g.out);
      const training::Checkpoint cp = training::load_checkpoint(model_path);
      const auto sequences = load_subset(dir, embed_subset);
      const auto embedded = evaluation::embed_subjects(cp.weights, cp.model_config, sequences, g.threads);
      evaluation::export_embeddings(target, embedded);
      out << "wrote " << sequences.size() << " embeddings to " << target.string() << '\n';
      return kExitOk;
    }

    if (*enroll || *verify) {
      const fs::path model_path = require(g.model, "--model");
      require(session_path, "--session");
      std::string user = user_id;
      const data::Session session = read_session_file(session_path, user);
      service::TemplateStore store(store_path);
      if (*enroll) {
        const service::Verifier verifier = service::Verifier::from_file(model_path);
        service::TemplateRecord record = store.enrol(user, verifier.embed(session.events), service::now_ms());
        if (fixed_threshold && !calibration_scores.empty()) {
          throw ContractError("--threshold and --calibrate are mutually exclusive");
        }
        if (fixed_threshold) {
          record = *store.set_threshold(user, fixed_threshold, service::now_ms());
        } else if (!calibration_scores.empty()) {
          const auto sets = evaluation::read_scores(calibration_scores);
          const evaluation::ScoreSet* chosen = nullptr;
          for (const auto& s : sets)
            if (s.subject_id == user) chosen = &s;
          if (chosen == nullptr && sets.size() == 1) chosen = &sets.front();
          if (chosen == nullptr) throw ContractError(calibration_scores + " has no scores for user " + user);
          record = *store.set_threshold(user, service::calibrate_threshold(*chosen), service::now_ms());
        }
        nlohmann::json result = {{"user_id", record.user_id}, {"sessions_enrolled", record.sessions_enrolled()}};
        if (record.threshold) result["threshold"] = *record.threshold;
        out << result.dump() << '\n';
        return kExitOk;
      }
      const service::ThresholdSource source =
          verify_policy == "per_user" ? service::ThresholdSource::kPerUser
          : verify_policy == "global" ? service::ThresholdSource::kGlobal
                                      : throw ConfigError("--threshold-policy must be global or per_user");
      const service::Verifier verifier = service::Verifier::from_file(model_path, std::nullopt, source);
      const auto record = store.get(user);
      if (!record) throw ContractError("unknown user " + user);
      out << service::to_json(verifier.verify(*record, verifier.embed(session.events))).dump() << '\n';
      return kExitOk;
    }

    if (*serve) {
      service::ServiceConfig config;
      if (!g.config.empty()) config = service::ServiceConfig::load(g.config);
      config.apply_environment();
      if (!g.model.empty()) config.model = g.model;
      if (!serve_store.empty()) config.store = serve_store;
      if (!bind.empty()) config.set_bind(bind);
      if (config.model.empty()) throw ConfigError("no model: pass --model, set it in --config or KEYFORMER_MODEL");
      if (config.store.empty()) throw ConfigError("no store: pass --store, set it in --config or KEYFORMER_STORE");
      service::Service svc(config);
      const int port = svc.bind(config.host, config.port);
      out << "serving on " << config.host << ':' << port << " (model " << svc.verifier().model_checksum() << ")"
          << std::endl;
      svc.run();
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace cli
KEYFORMER_END_NAMESPACE
