// SPDX-License-Identifier: Apache-2.0
// faigcn: command-line front end for ingestion, feature extraction, training,
// cross-validation, ablations, robustness sweeps and synthetic data.

#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "faigcn/baselines.hpp"
#include "faigcn/dataset.hpp"
#include "faigcn/error.hpp"
#include "faigcn/evalkit.hpp"
#include "faigcn/format.hpp"
#include "faigcn/model.hpp"
#include "faigcn/nn/checkpoint.hpp"
#include "faigcn/synth.hpp"
#include "faigcn/training.hpp"

namespace fs = std::filesystem;
using namespace faigcn;

namespace {

constexpr const char* kVersion = "0.1.0";

struct RunConfig {
  std::optional<std::string> preset;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  double c = spectral::kDefaultC;
  double cutoff_hz = spectral::kDefaultCutoffHz;
  int n_fft = spectral::kDefaultFftLength;
  int attention_variant = 2;
  std::optional<int> epochs;
  double conf_threshold = 0.0;
  std::string log_path;
};

// Progress and diagnostics go to stderr; timestamps only to the log file, so
// every report stays byte-identical across reruns.
class Log {
 public:
  explicit Log(const std::string& path) {
    if (!path.empty()) file_.open(path, std::ios::app);
  }
  void operator()(const std::string& line) {
    std::cerr << line << '\n';
    if (file_) {
      const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
      char stamp[32];
      std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%S", std::gmtime(&now));
      file_ << stamp << ' ' << line << '\n';
    }
  }

 private:
  std::ofstream file_;
};

training::TrainConfig train_config(const RunConfig& rc) {
  auto tc = training::preset_config(rc.preset.value_or("mini_rgbd_like"));
  tc.seed = rc.seed;
  if (rc.epochs) tc.max_epochs = *rc.epochs;
  tc.validate();
  return tc;
}

model::FaigcnConfig model_config(const RunConfig& rc) {
  model::FaigcnConfig mc;
  mc.variant = model::attention_variant_from_int(rc.attention_variant);
  return mc;
}

std::shared_ptr<const spectral::BinSchedule> schedule_for(const RunConfig& rc, double c) {
  return std::make_shared<const spectral::BinSchedule>(
      spectral::build_schedule(spectral::kReferenceFps, rc.n_fft, rc.cutoff_hz, c));
}

std::string schedule_line(const spectral::BinSchedule& s) {
  return "schedule ref_fps=" + fmt::shortest(s.ref_fps) + " n_fft=" + std::to_string(s.n_fft) +
         " cutoff_hz=" + fmt::shortest(s.cutoff_hz) + " c=" + fmt::shortest(s.c) +
         " coverage=" + std::to_string(s.coverage) + " bins=" + std::to_string(s.num_bins());
}

std::vector<PoseSequence> load_labelled(const std::string& dir) {
  auto seqs = data::load_sequence_directory(dir);
  data::require_labels(seqs);
  return seqs;
}

training::LoocvOptions loocv_options(const RunConfig& rc, Log& log) {
  training::LoocvOptions opt;
  opt.workers = rc.workers;
  opt.on_fold = [&log](const training::FoldResult& f) {
    log("fold " + f.held_out_id + " truth=" + std::string(label_name(f.truth)) +
        " predicted=" + std::string(label_name(f.predicted)));
  };
  return opt;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  for (auto tok : fmt::split(text, ',')) out.push_back(fmt::to_double(tok));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Frequency-attention graph network toolkit for skeletal movement classification"};
  app.require_subcommand(1);
  app.set_version_flag("--version",
                       std::string("faigcn ") + kVersion + " (sequence format " +
                           std::to_string(kSequenceFormatVersion) + ", feature format " +
                           std::to_string(spectral::kFeatureFormatVersion) + ", checkpoint format " +
                           std::to_string(nn::kCheckpointVersion) + ", loocv report 1, attention export 1)");
  app.set_config("--config", "", "key = value file; flags on the command line win");
  app.allow_config_extras(CLI::config_extras_mode::error);

  RunConfig rc;
  app.add_option("--preset", rc.preset, "training preset (mini_rgbd_like, rvi38_like) or synth preset");
  app.add_option("--seed", rc.seed, "seed for every randomized step");
  app.add_option("--workers", rc.workers, "concurrent folds")->check(CLI::PositiveNumber);
  app.add_option("--c", rc.c, "bin growth parameter")->check(CLI::PositiveNumber);
  app.add_option("--cutoff-hz,--cutoff_hz", rc.cutoff_hz, "highest kept frequency")->check(CLI::PositiveNumber);
  app.add_option("--n-fft,--n_fft", rc.n_fft, "transform length at the reference rate")->check(CLI::PositiveNumber);
  app.add_option("--attention-variant,--attention_variant", rc.attention_variant,
                 "1 = 1 + cosine score, 2 = dot-product score")
      ->check(CLI::IsMember({1, 2}));
  app.add_option("--epochs", rc.epochs, "override the preset's epoch count")->check(CLI::PositiveNumber);
  app.add_option("--conf-threshold,--conf_threshold", rc.conf_threshold, "confidence at or below which a keypoint is missing")
      ->check(CLI::Range(0.0, 0.999999));
  app.add_option("--log", rc.log_path, "append timestamped progress lines to this file");

  auto sub = [&app](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    s->fallthrough();
    return s;
  };

  // ingest
  std::string in_path, out_path, subject, label_text, data_dir, ckpt_path, format = "text";
  double fps = 0.0;
  auto* ingest = sub("ingest", "keypoint JSON directory -> repaired canonical sequence file");
  ingest->add_option("--input", in_path, "directory of per-frame keypoint files")->required();
  ingest->add_option("--fps", fps, "frame rate of the input")->required();
  ingest->add_option("--subject", subject, "subject id (default: directory name)");
  ingest->add_option("--label", label_text, "normal or abnormal")->check(CLI::IsMember({"normal", "abnormal"}));
  ingest->add_option("--out", out_path, "output sequence file")->required();

  // features
  std::optional<double> fps_override;
  auto* features = sub("features", "sequence file or directory -> spectral features");
  features->add_option("--input", in_path, "sequence file or directory of them")->required();
  features->add_option("--out", out_path, "output file (or directory for a directory input)")->required();
  features->add_option("--fps", fps_override, "frame rate of the input, overriding the file header");
  features->add_option("--format", format, "text or binary")->check(CLI::IsMember({"text", "binary"}));

  // train
  std::string curve_path;
  auto* train = sub("train", "train on a labelled sequence directory and write a checkpoint");
  train->add_option("--data", data_dir, "directory of labelled sequence files")->required();
  train->add_option("--out", out_path, "checkpoint file")->required();
  train->add_option("--loss-curve", curve_path, "write the per-epoch loss");

  // loocv
  auto* loocv = sub("loocv", "leave-one-out cross-validation report");
  loocv->add_option("--data", data_dir, "directory of labelled sequence files")->required();
  loocv->add_option("--out", out_path, "report file")->required();

  // ablation
  auto* ablation = sub("ablation", "baselines and network with and without binning");
  ablation->add_option("--data", data_dir, "directory of labelled sequence files")->required();
  ablation->add_option("--out", out_path, "table file")->required();

  // robustness
  std::string levels_text = "0.15,0.30,0.60,1.20", seeds_text = "0,1,2,3,4,5,6,7,8,9";
  auto* robustness = sub("robustness", "Gaussian-noise sweep summarized per level");
  robustness->add_option("--data", data_dir, "directory of labelled sequence files")->required();
  robustness->add_option("--out", out_path, "report file")->required();
  robustness->add_option("--levels", levels_text, "comma-separated fractions of the coordinate std");
  robustness->add_option("--seeds", seeds_text, "comma-separated seeds");

  // search-c
  std::string grid_text, classifier = "LR";
  auto* search = sub("search-c", "pick the bin growth parameter by LOOCV accuracy");
  search->add_option("--data", data_dir, "directory of labelled sequence files")->required();
  search->add_option("--grid", grid_text, "comma-separated candidate values (> 1)")->required();
  search->add_option("--classifier", classifier, "LR, LDA, Tree, SVM or FAIGCN")
      ->check(CLI::IsMember({"LR", "LDA", "Tree", "SVM", "FAIGCN"}));
  search->add_option("--out", out_path, "result file");

  // synth
  std::optional<std::size_t> n_normal, n_abnormal;
  std::optional<double> jitter;
  auto* synth_cmd = sub("synth", "write a synthetic labelled dataset");
  synth_cmd->add_option("--out", out_path, "output directory")->required();
  synth_cmd->add_option("--n-normal", n_normal, "normal subjects");
  synth_cmd->add_option("--n-abnormal", n_abnormal, "abnormal subjects");
  synth_cmd->add_option("--jitter", jitter, "Gaussian jitter in pixels");

  // attention-export
  auto* attn = sub("attention-export", "per-subject attention tables from a checkpoint");
  attn->add_option("--data", data_dir, "directory of sequence files")->required();
  attn->add_option("--checkpoint", ckpt_path, "checkpoint written by train")->required();
  attn->add_option("--out", out_path, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  Log log(rc.log_path);
  try {
    if (*ingest) {
      std::optional<Label> label;
      if (!label_text.empty()) label = label_from_name(label_text);
      if (subject.empty()) subject = fs::path(in_path).filename().string();
      auto raw = load_keypoint_directory(in_path, fps, subject, label);
      auto repaired = interpolate_missing(raw, rc.conf_threshold);
      fmt::write_file_atomic(out_path, serialize_sequence(repaired.sequence, repaired.all_missing));
      log("ingested " + std::to_string(raw.size()) + " frames, " + std::to_string(repaired.all_missing.size()) +
          " joints missing throughout");
    } else if (*features) {
      const auto sched = schedule_for(rc, rc.c);
      log(schedule_line(*sched));
      const bool dir_input = fs::is_directory(in_path);
      std::vector<PoseSequence> seqs;
      if (dir_input) {
        seqs = data::load_sequence_directory(in_path);
      } else {
        seqs.push_back(parse_sequence(fmt::read_file(in_path)).sequence);
      }
      if (dir_input) fs::create_directories(out_path);
      for (auto& seq : seqs) {
        if (fps_override) seq.fps = *fps_override;
        if (seq.fps != sched->ref_fps) {
          log("subject " + seq.subject_id + ": resampling " + fmt::shortest(seq.fps) + " fps to the " +
              fmt::shortest(sched->ref_fps) + " fps reference grid");
        }
        const auto f = data::prepare(seq, sched, {rc.conf_threshold});
        const auto bytes =
            format == "binary" ? spectral::serialize_features_binary(f) : spectral::serialize_features_text(f);
        const fs::path target =
            dir_input ? fs::path(out_path) / (seq.subject_id + (format == "binary" ? ".featb" : ".feat"))
                      : fs::path(out_path);
        fmt::write_file_atomic(target, bytes);
      }
    } else if (*train) {
      const auto seqs = load_labelled(data_dir);
      const auto sched = schedule_for(rc, rc.c);
      log(schedule_line(*sched));
      const auto feats = data::prepare_all(seqs, sched, {rc.conf_threshold});
      const auto mc = model_config(rc);
      auto result = training::train(feats, mc, train_config(rc));
      auto ckpt = model::to_checkpoint(result.params, mc);
      ckpt.metadata.emplace_back("seed", std::to_string(rc.seed));
      ckpt.metadata.emplace_back("c", fmt::shortest(rc.c));
      ckpt.metadata.emplace_back("cutoff_hz", fmt::shortest(rc.cutoff_hz));
      ckpt.metadata.emplace_back("n_fft", std::to_string(rc.n_fft));
      fmt::write_file_atomic(out_path, nn::serialize_checkpoint(ckpt));
      if (!curve_path.empty()) {
        std::string s = "epoch,loss\n";
        for (std::size_t e = 0; e < result.loss_curve.size(); ++e) {
          s += std::to_string(e) + ',' + fmt::shortest(result.loss_curve[e]) + '\n';
        }
        fmt::write_file_atomic(curve_path, s);
      }
      log("final loss " + fmt::shortest(result.loss_curve.back()));
    } else if (*loocv) {
      const auto seqs = load_labelled(data_dir);
      const auto sched = schedule_for(rc, rc.c);
      log(schedule_line(*sched));
      const auto feats = data::prepare_all(seqs, sched, {rc.conf_threshold});
      const auto report = training::loocv(feats, model_config(rc), train_config(rc), loocv_options(rc, log));
      fmt::write_file_atomic(out_path, training::format_loocv_report(report));
      log(eval::format_metrics(report.metrics));
    } else if (*ablation) {
      const auto seqs = load_labelled(data_dir);
      baselines::AblationConfig cfg;
      cfg.model = model_config(rc);
      cfg.train = train_config(rc);
      cfg.loocv = loocv_options(rc, log);
      cfg.preprocess.conf_threshold = rc.conf_threshold;
      cfg.n_fft = rc.n_fft;
      cfg.cutoff_hz = rc.cutoff_hz;
      cfg.c = rc.c;
      const auto rows = baselines::ablation_table(seqs, cfg);
      fmt::write_file_atomic(out_path, baselines::format_ablation_table(rows));
    } else if (*robustness) {
      const auto seqs = load_labelled(data_dir);
      eval::NoiseSpec noise;
      noise.levels = parse_list(levels_text);
      noise.seeds.clear();
      for (auto tok : fmt::split(seeds_text, ',')) noise.seeds.push_back(static_cast<std::uint64_t>(fmt::to_integer(tok)));
      eval::SweepOptions opt;
      opt.loocv = loocv_options(rc, log);
      opt.preprocess.conf_threshold = rc.conf_threshold;
      const auto report =
          eval::robustness_sweep(seqs, schedule_for(rc, rc.c), noise, model_config(rc), train_config(rc), opt);
      fmt::write_file_atomic(out_path, eval::format_robustness_report(report));
    } else if (*search) {
      const auto seqs = load_labelled(data_dir);
      const auto grid = parse_list(grid_text);
      std::string table = "c,accuracy\n";
      const auto best = spectral::search_c(grid, [&](double c) {
        const auto feats = data::prepare_all(seqs, schedule_for(rc, c), {rc.conf_threshold});
        double acc = 0.0;
        if (classifier == "FAIGCN") {
          acc = training::loocv(feats, model_config(rc), train_config(rc), loocv_options(rc, log)).accuracy();
        } else {
          acc = eval::metrics(baselines::loocv_baseline(baselines::kind_from_name(classifier), feats)).ac;
        }
        table += fmt::shortest(c) + ',' + fmt::fixed(acc, 4) + '\n';
        log("c=" + fmt::shortest(c) + " accuracy=" + fmt::fixed(acc, 2));
        return acc;
      });
      table += "best " + fmt::shortest(best) + '\n';
      if (!out_path.empty()) fmt::write_file_atomic(out_path, table);
      std::cout << "best c " << fmt::shortest(best) << '\n';
    } else if (*synth_cmd) {
      auto spec = synth::preset(rc.preset.value_or("mini-like"));
      spec.seed = rc.seed;
      if (n_normal) spec.n_normal = *n_normal;
      if (n_abnormal) spec.n_abnormal = *n_abnormal;
      if (jitter) spec.jitter_std = *jitter;
      const auto seqs = synth::generate(spec);
      data::write_sequence_directory(out_path, seqs);
      log("wrote " + std::to_string(seqs.size()) + " sequences to " + out_path);
    } else if (*attn) {
      const auto ckpt = nn::parse_checkpoint(fmt::read_file(ckpt_path));
      const auto mc = model_config(rc);
      auto params = model::from_checkpoint(ckpt, mc);
      // The schedule the checkpoint was trained on wins over the flags.
      if (const auto* v = ckpt.find_meta("c")) rc.c = fmt::to_double(*v);
      if (const auto* v = ckpt.find_meta("cutoff_hz")) rc.cutoff_hz = fmt::to_double(*v);
      if (const auto* v = ckpt.find_meta("n_fft")) rc.n_fft = static_cast<int>(fmt::to_integer(*v));
      const auto sched = schedule_for(rc, rc.c);
      const auto topo = model::build_topology(mc, sched->num_bins());
      fs::create_directories(out_path);
      for (const auto& seq : data::load_sequence_directory(data_dir)) {
        const auto f = data::prepare(seq, sched, {rc.conf_threshold});
        const auto out = model::evaluate(f, topo, params, mc);
        fmt::write_file_atomic(fs::path(out_path) / (seq.subject_id + ".attention.tsv"),
                               eval::export_attention(model::attention_map(out.alpha), seq.subject_id));
      }
    }
  } catch (const faigcn::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
