// Command-line front end: train, gradcheck, eval, attend, synth, sample.
// Exit codes: 0 success, 2 usage, 3 data/format error, 4 numeric failure.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dsta/dsta.hpp"

namespace fs = std::filesystem;

namespace {

int exit_code_for(const dsta::Error& e) {
  switch (e.code()) {
    case dsta::Errc::numeric_failure:
    case dsta::Errc::degenerate_vector:
      return 4;
    default:
      return 3;
  }
}

void write_text(const std::string& path, const std::string& text) {
  dsta::detail::write_binary_file(path, text);
}

struct GradcheckOptions {
  std::uint64_t seed = 0;
  std::size_t instances = 5;
  double eps = 1e-5;
  // 0 = randomized per instance within desk-scale ranges
  std::size_t chunks = 0, heads = 0, grid_h = 0, grid_w = 0, feature_dim = 0, hidden_dim = 0,
              embed_dim = 0, identities = 0;
};

dsta::Hyperparams random_tiny_hp(dsta::Rng& rng, const GradcheckOptions& opt, std::size_t instance) {
  dsta::Hyperparams hp;
  hp.chunks = opt.chunks ? opt.chunks : 3 + rng.uniform_index(4);        // 3..6
  hp.heads = opt.heads ? opt.heads : 1 + rng.uniform_index(4);           // 1..4
  hp.grid_h = opt.grid_h ? opt.grid_h : 2;
  hp.grid_w = opt.grid_w ? opt.grid_w : 2 + rng.uniform_index(3);        // L = 4..8
  hp.feature_dim = opt.feature_dim ? opt.feature_dim : 4 + rng.uniform_index(5);  // 4..8
  hp.hidden_dim = opt.hidden_dim ? opt.hidden_dim : 2 + rng.uniform_index(3);
  hp.embed_dim = opt.embed_dim ? opt.embed_dim : 3 + rng.uniform_index(4);
  hp.lambda_div = 0.1;
  switch (instance % 3) {
    case 0: hp.penalty = dsta::PenaltyKind::q; break;
    case 1: hp.penalty = dsta::PenaltyKind::qprime; break;
    default: hp.penalty = dsta::PenaltyKind::none; break;
  }
  hp.enhancement = instance % 2 == 0;
  return hp;
}

int run_gradcheck(const GradcheckOptions& opt) {
  dsta::Rng rng(opt.seed);
  double worst = 0.0;
  std::string worst_group;
  for (std::size_t inst = 0; inst < opt.instances; ++inst) {
    dsta::Hyperparams hp = random_tiny_hp(rng, opt, inst);
    const std::size_t identities = opt.identities ? opt.identities : 2 + rng.uniform_index(3);

    dsta::Rng init_rng = rng.derive(100 + inst);
    dsta::ModelParams params = dsta::init_params(hp, init_rng);
    dsta::OimState state = dsta::make_oim_state(identities, hp.embed_dim, hp.tau, hp.gamma);
    for (std::size_t i = 0; i < identities; ++i) {
      dsta::VecD row(hp.embed_dim);
      for (double& v : row) v = init_rng.normal();
      row = dsta::l2_normalize(row);
      std::copy(row.begin(), row.end(), state.table.row(i));
    }
    std::vector<dsta::FrameFeatureGrid> frames;
    for (std::size_t f = 0; f < hp.chunks; ++f) {
      dsta::FrameFeatureGrid g(hp.grid_h, hp.grid_w, hp.feature_dim);
      for (double& v : g.cells.data) v = init_rng.normal();
      frames.push_back(std::move(g));
    }
    dsta::VideoSample sample = dsta::make_video_sample(
        frames, dsta::first_frame_sample(frames.size(), hp.chunks));
    const std::size_t label = init_rng.uniform_index(identities);

    dsta::Rng coord_rng = rng.derive(200 + inst);
    dsta::GradCheckReport report =
        dsta::grad_check(params, state, sample, label, hp, opt.eps, coord_rng);
    std::printf("instance %zu (N=%zu K=%zu L=%zu D=%zu d=%zu E=%zu penalty=%s enh=%d)\n", inst,
                hp.chunks, hp.heads, hp.cell_count(), hp.feature_dim, hp.hidden_dim, hp.embed_dim,
                dsta::penalty_name(hp.penalty), hp.enhancement ? 1 : 0);
    for (const auto& g : report.groups) {
      std::printf("  %-22s max_rel_err %.3e\n", g.name.c_str(), g.max_rel_err);
      if (g.max_rel_err > worst) {
        worst = g.max_rel_err;
        worst_group = g.name;
      }
    }
  }
  std::printf("worst %.3e (%s), threshold 1e-4\n", worst, worst_group.c_str());
  if (worst > 1e-4) {
    std::fprintf(stderr, "error: numeric_failure: gradient check exceeded 1e-4\n");
    return 4;
  }
  return 0;
}

int run_train(const std::string& config_path, const std::string& out_dir) {
  const dsta::RunConfig cfg = dsta::load_config(config_path);
  const dsta::Dataset ds = dsta::build_dataset(cfg);
  dsta::TrainOutput out = dsta::train(cfg, ds);
  fs::create_directories(out_dir);
  const std::string ckpt = out_dir + "/checkpoint.dvat";
  const std::string metrics = out_dir + "/metrics.csv";
  dsta::save_checkpoint(ckpt, cfg.hp, out.params, out.state);
  write_text(metrics, out.metrics_csv);
  if (out.diverged) {
    std::fprintf(stderr, "error: numeric_failure: divergence at epoch %zu; wrote last-good %s\n",
                 out.diverged_epoch, ckpt.c_str());
    return 4;
  }
  if (!out.history.empty()) {
    const auto& last = out.history.back();
    std::printf("epoch %zu loss %.6f rank1 %.4f mAP %.4f\n", last.epoch, last.loss, last.rank1,
                last.map);
  }
  std::printf("checkpoint %s\nmetrics %s\n", ckpt.c_str(), metrics.c_str());
  return 0;
}

dsta::Dataset load_eval_dir(const std::string& dir) {
  return dsta::load_dataset(dir);
}

int run_eval(const std::string& ckpt_path, const std::string& gallery_dir,
             const std::string& probes_dir, const std::string& out_file, std::size_t k_max) {
  const dsta::Checkpoint cp = dsta::load_checkpoint(ckpt_path);
  const dsta::Dataset gallery_ds = load_eval_dir(gallery_dir);
  const dsta::Dataset probe_ds = load_eval_dir(probes_dir);

  dsta::Gallery gallery;
  gallery.embeddings = dsta::Mat(gallery_ds.videos.size(), cp.hp.embed_dim);
  for (std::size_t i = 0; i < gallery_ds.videos.size(); ++i) {
    const dsta::VecD e = dsta::embed_video(gallery_ds.videos[i], cp.params, cp.hp);
    std::copy(e.begin(), e.end(), gallery.embeddings.row(i));
    gallery.labels.push_back(gallery_ds.videos[i].label);
    gallery.cameras.push_back(gallery_ds.videos[i].camera);
  }
  std::vector<dsta::Probe> probes;
  for (const auto& v : probe_ds.videos)
    probes.push_back({dsta::embed_video(v, cp.params, cp.hp), v.label, v.camera});

  if (k_max == 0) k_max = gallery.size();
  const dsta::VecD curve = dsta::cmc(probes, gallery, k_max);
  const double map = dsta::mean_ap(probes, gallery);

  std::string csv = "k,accuracy\n";
  for (std::size_t k = 0; k < curve.size(); ++k)
    csv += std::to_string(k + 1) + "," + dsta::detail::format_double(curve[k]) + "\n";
  csv += "mAP," + dsta::detail::format_double(map) + "\n";
  if (out_file.empty()) {
    std::fputs(csv.c_str(), stdout);
  } else {
    write_text(out_file, csv);
    std::printf("wrote %s\n", out_file.c_str());
  }
  return 0;
}

int run_attend(const std::string& ckpt_path, const std::string& video_path,
               const std::string& out_dir) {
  const dsta::Checkpoint cp = dsta::load_checkpoint(ckpt_path);
  const std::vector<dsta::FrameFeatureGrid> frames = dsta::load_feature_grids(video_path);
  const dsta::VideoSample sample = dsta::make_video_sample(
      frames, dsta::first_frame_sample(frames.size(), cp.hp.chunks));
  const dsta::DescribeResult d = dsta::describe(sample, cp.params, cp.hp);

  fs::create_directories(out_dir);
  write_text(out_dir + "/heatmaps.csv", dsta::heatmap_csv(d.fields));
  write_text(out_dir + "/temporal.csv", dsta::temporal_csv(d.temporal_weights));
  for (std::size_t n = 0; n < d.fields.size(); ++n) {
    for (std::size_t k = 0; k < d.fields[n].rows; ++k) {
      char name[64];
      std::snprintf(name, sizeof(name), "/receptive_n%zu_k%zu.pgm", n, k);
      write_text(out_dir + name, dsta::pgm_image(d.fields[n].row(k), cp.hp.grid_h, cp.hp.grid_w));
    }
  }
  std::printf("wrote %zu heatmaps to %s\n", d.fields.size() * cp.hp.heads, out_dir.c_str());
  return 0;
}

int run_synth(const std::string& spec_path, const std::string& out_dir) {
  const dsta::SynthSpec spec = dsta::load_synth_spec(spec_path);
  const dsta::SyntheticDataset ds = dsta::make_synthetic(spec);
  fs::create_directories(out_dir);
  std::vector<dsta::LabelEntry> labels;
  for (std::size_t i = 0; i < ds.videos.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "video_%04zu.fgrid", i);
    dsta::save_feature_grids(out_dir + "/" + name, ds.videos[i].frames);
    labels.push_back({name, ds.videos[i].identity, ds.videos[i].camera});
  }
  dsta::save_labels(out_dir + "/labels.csv", labels);
  std::printf("wrote %zu videos to %s\n", ds.videos.size(), out_dir.c_str());
  return 0;
}

int run_sample(std::size_t frames, std::size_t chunks, std::uint64_t seed) {
  dsta::Rng rng(seed);
  const std::vector<std::size_t> idx = dsta::restricted_random_sample(frames, chunks, rng);
  std::string line;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i) line += " ";
    line += std::to_string(idx[i]);
  }
  std::printf("%s\n", line.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diversity-regularized spatiotemporal attention pipeline"};
  app.require_subcommand(1);

  auto* train_cmd = app.add_subcommand("train", "train a model from a config file");
  std::string train_config, train_out = ".";
  train_cmd->add_option("--config", train_config, "key = value config file")->required();
  train_cmd->add_option("--out", train_out, "output directory");

  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check");
  GradcheckOptions gopt;
  grad_cmd->add_option("--seed", gopt.seed, "rng seed")->required();
  grad_cmd->add_option("--instances", gopt.instances, "instance count");
  grad_cmd->add_option("--eps", gopt.eps, "finite-difference step");
  grad_cmd->add_option("--N", gopt.chunks, "frames per video");
  grad_cmd->add_option("--K", gopt.heads, "spatial heads");
  grad_cmd->add_option("--grid-h", gopt.grid_h, "grid height");
  grad_cmd->add_option("--grid-w", gopt.grid_w, "grid width");
  grad_cmd->add_option("--D", gopt.feature_dim, "feature dim");
  grad_cmd->add_option("--d", gopt.hidden_dim, "hidden dim");
  grad_cmd->add_option("--E", gopt.embed_dim, "embedding dim");
  grad_cmd->add_option("--C", gopt.identities, "identity count");

  auto* eval_cmd = app.add_subcommand("eval", "CMC / mAP retrieval evaluation");
  std::string eval_ckpt, eval_gallery, eval_probes, eval_out;
  std::size_t eval_kmax = 0;
  eval_cmd->add_option("--checkpoint", eval_ckpt)->required();
  eval_cmd->add_option("--gallery", eval_gallery, "gallery directory")->required();
  eval_cmd->add_option("--probes", eval_probes, "probe directory")->required();
  eval_cmd->add_option("--out", eval_out, "output CSV (default stdout)");
  eval_cmd->add_option("--kmax", eval_kmax, "CMC curve length (default gallery size)");

  auto* attend_cmd = app.add_subcommand("attend", "export receptive fields and temporal weights");
  std::string attend_ckpt, attend_video, attend_out = ".";
  attend_cmd->add_option("--checkpoint", attend_ckpt)->required();
  attend_cmd->add_option("--video", attend_video, "FeatureGridFile")->required();
  attend_cmd->add_option("--out", attend_out, "output directory");

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_spec, synth_out;
  synth_cmd->add_option("--spec", synth_spec, "generator spec file")->required();
  synth_cmd->add_option("--out", synth_out, "output directory")->required();

  auto* sample_cmd = app.add_subcommand("sample", "restricted random frame sampling");
  std::size_t sample_frames = 0, sample_chunks = 0;
  std::uint64_t sample_seed = 0;
  sample_cmd->add_option("--frames", sample_frames, "video frame count")->required();
  sample_cmd->add_option("--chunks", sample_chunks, "chunk count N")->required();
  sample_cmd->add_option("--seed", sample_seed, "rng seed")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (*train_cmd) return run_train(train_config, train_out);
    if (*grad_cmd) return run_gradcheck(gopt);
    if (*eval_cmd) return run_eval(eval_ckpt, eval_gallery, eval_probes, eval_out, eval_kmax);
    if (*attend_cmd) return run_attend(attend_ckpt, attend_video, attend_out);
    if (*synth_cmd) return run_synth(synth_spec, synth_out);
    if (*sample_cmd) return run_sample(sample_frames, sample_chunks, sample_seed);
  } catch (const dsta::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 3;
  }
  return 2;
}
