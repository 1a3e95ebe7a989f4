#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dsta/config.hpp"
#include "dsta/error.hpp"
#include "dsta/eval.hpp"
#include "dsta/io.hpp"
#include "dsta/model.hpp"
#include "dsta/oim.hpp"
#include "dsta/pipeline.hpp"
#include "dsta/sampling.hpp"
#include "dsta/synthetic.hpp"

namespace dsta {

struct LabeledVideo {
  std::vector<FrameFeatureGrid> frames;
  std::size_t label = 0;
  std::size_t camera = 0;
};

struct Dataset {
  std::vector<LabeledVideo> videos;
  std::size_t identity_count = 0;
};

inline Dataset dataset_from_synthetic(SyntheticDataset&& sd) {
  Dataset ds;
  ds.identity_count = sd.spec.identities;
  ds.videos.reserve(sd.videos.size());
  for (SyntheticVideo& v : sd.videos)
    ds.videos.push_back({std::move(v.frames), v.identity, v.camera});
  return ds;
}

// Directory with a labels.csv naming FeatureGridFiles relative to it.
inline Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  for (const LabelEntry& e : load_labels(dir + "/labels.csv")) {
    LabeledVideo v;
    v.frames = load_feature_grids(dir + "/" + e.file);
    v.label = e.identity;
    v.camera = e.camera;
    ds.identity_count = std::max(ds.identity_count, e.identity + 1);
    ds.videos.push_back(std::move(v));
  }
  return ds;
}

// Per (identity, camera), the last holdout_per_camera videos in dataset
// order are held out; camera-0 holdouts become probes, the rest gallery.
struct DataSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> probe;
  std::vector<std::size_t> gallery;
};

inline DataSplit make_split(const Dataset& ds, std::size_t holdout_per_camera) {
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < ds.videos.size(); ++i)
    groups[{ds.videos[i].label, ds.videos[i].camera}].push_back(i);
  DataSplit split;
  for (auto& [key, indices] : groups) {
    const std::size_t held = std::min(holdout_per_camera, indices.size());
    const std::size_t cut = indices.size() - held;
    for (std::size_t j = 0; j < indices.size(); ++j) {
      if (j < cut) {
        split.train.push_back(indices[j]);
      } else if (key.second == 0) {
        split.probe.push_back(indices[j]);
      } else {
        split.gallery.push_back(indices[j]);
      }
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.probe.begin(), split.probe.end());
  std::sort(split.gallery.begin(), split.gallery.end());
  return split;
}

inline VideoSample sample_first_frames(const LabeledVideo& v, std::size_t chunks) {
  return make_video_sample(v.frames, first_frame_sample(v.frames.size(), chunks));
}

inline VecD embed_video(const LabeledVideo& v, const ModelParams& params,
                        const Hyperparams& cfg) {
  return describe(sample_first_frames(v, cfg.chunks), params, cfg).embedding;
}

struct RetrievalScores {
  double rank1 = 0.0;
  double map = 0.0;
};

inline RetrievalScores score_retrieval(const Dataset& ds, const DataSplit& split,
                                       const ModelParams& params, const Hyperparams& cfg) {
  if (split.probe.empty() || split.gallery.empty())
    throw Error(Errc::protocol_error, "retrieval split needs probes and gallery");
  Gallery gallery;
  gallery.embeddings = Mat(split.gallery.size(), cfg.embed_dim);
  for (std::size_t i = 0; i < split.gallery.size(); ++i) {
    const LabeledVideo& v = ds.videos[split.gallery[i]];
    const VecD e = embed_video(v, params, cfg);
    std::copy(e.begin(), e.end(), gallery.embeddings.row(i));
    gallery.labels.push_back(v.label);
    gallery.cameras.push_back(v.camera);
  }
  std::vector<Probe> probes;
  for (std::size_t idx : split.probe) {
    const LabeledVideo& v = ds.videos[idx];
    probes.push_back({embed_video(v, params, cfg), v.label, v.camera});
  }
  RetrievalScores s;
  s.rank1 = cmc(probes, gallery, 1)[0];
  s.map = mean_ap(probes, gallery);
  return s;
}

// Mean pairwise Bhattacharyya coefficient of receptive fields over every
// frame (first-frame sampling) of the given videos.
inline double mean_receptive_overlap(const Dataset& ds, const std::vector<std::size_t>& indices,
                                     const ModelParams& params, const Hyperparams& cfg) {
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t idx : indices) {
    DescribeResult d = describe(sample_first_frames(ds.videos[idx], cfg.chunks), params, cfg);
    for (const Mat& s : d.fields) {
      acc += mean_pairwise_bhattacharyya(ReceptiveFieldSet{s});
      ++count;
    }
  }
  return count ? acc / static_cast<double>(count) : 0.0;
}

// Mean max-cell mass of receptive fields (1/L for uniform rows, 1 for
// one-hot rows); the concentration side of the Q vs Q' contrast.
inline double mean_field_concentration(const Dataset& ds, const std::vector<std::size_t>& indices,
                                       const ModelParams& params, const Hyperparams& cfg) {
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t idx : indices) {
    DescribeResult d = describe(sample_first_frames(ds.videos[idx], cfg.chunks), params, cfg);
    for (const Mat& s : d.fields) {
      for (std::size_t k = 0; k < s.rows; ++k) {
        acc += *std::max_element(s.row(k), s.row(k) + s.cols);
        ++count;
      }
    }
  }
  return count ? acc / static_cast<double>(count) : 0.0;
}

struct EpochMetrics {
  std::size_t epoch = 0;
  double loss = 0.0;
  double oim_loss = 0.0;
  double penalty = 0.0;
  double mean_bhattacharyya = 0.0;
  double rank1 = 0.0;
  double map = 0.0;
};

struct TrainOutput {
  ModelParams params;
  OimState state;
  std::vector<EpochMetrics> history;
  std::string metrics_csv;   // config header + one row per epoch
  bool diverged = false;     // params/state hold the last good epoch state
  std::size_t diverged_epoch = 0;
};

// Deterministic SGD training loop. Same (seed, config, dataset) yields a
// bit-identical TrainOutput.
inline TrainOutput train(const RunConfig& cfg, const Dataset& ds) {
  const Hyperparams& hp = cfg.hp;
  if (ds.identity_count < 2) throw Error(Errc::invalid_input, "dataset needs >= 2 identities");
  for (const LabeledVideo& v : ds.videos) {
    if (v.label >= ds.identity_count) throw Error(Errc::invalid_input, "label out of range");
    if (v.frames.empty()) throw Error(Errc::invalid_input, "video with no frames");
  }

  Rng master(hp.seed);
  Rng rng_init = master.derive(2);
  Rng rng_train = master.derive(3);

  TrainOutput out;
  out.params = init_params(hp, rng_init);
  out.state = make_oim_state(ds.identity_count, hp.embed_dim, hp.tau, hp.gamma);
  const DataSplit split = make_split(ds, cfg.holdout_per_camera);
  if (hp.epochs > 0 && split.train.empty())
    throw Error(Errc::invalid_input, "empty training split");

  std::ostringstream metrics;
  metrics << echo_config(cfg);
  metrics << "epoch,loss,oim_loss,penalty,mean_bhattacharyya,rank1,mAP\n";

  // One momentum buffer per parameter array (plus the table in
  // softmax-classifier mode), in param_refs order.
  std::vector<VecD> velocity;

  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    const ModelParams snapshot_params = out.params;
    const OimState snapshot_state = out.state;
    const double lr = epoch < hp.effective_drop_epoch() ? hp.lr_initial : hp.lr_dropped;

    Hyperparams ecfg = hp;
    if (epoch < hp.warmup_epochs) {
      // Spatial-only warmup: average pooling, no enhancement block.
      ecfg.temporal_mode = TemporalMode::average;
      ecfg.enhancement = false;
    }

    std::vector<std::size_t> order = split.train;
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng_train.uniform_index(i)]);

    double sum_loss = 0.0, sum_oim = 0.0, sum_pen = 0.0, sum_bc = 0.0;
    std::size_t frame_count = 0;
    bool finite = true;

    for (std::size_t start = 0; start < order.size() && finite; start += hp.batch_size) {
      const std::size_t stop = std::min(order.size(), start + hp.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      GradientBundle accum;
      accum.params = zeros_like(out.params);
      if (ecfg.loss == LossKind::softmax)
        accum.table = Mat(out.state.identity_count(), out.state.embed_dim());
      std::vector<std::pair<VecD, std::size_t>> batch_embeddings;

      for (std::size_t bi = start; bi < stop; ++bi) {
        const LabeledVideo& video = ds.videos[order[bi]];
        VideoSample sample = make_video_sample(
            video.frames, restricted_random_sample(video.frames.size(), hp.chunks, rng_train));
        ForwardResult fr = forward(sample, out.params, out.state, video.label, ecfg);
        if (!std::isfinite(fr.report.total)) {
          finite = false;
          break;
        }
        sum_loss += fr.report.total;
        sum_oim += fr.report.oim_loss;
        sum_pen += fr.report.diversity_penalty;
        for (const Mat& s : fr.cache.fields) {
          sum_bc += mean_pairwise_bhattacharyya(ReceptiveFieldSet{s});
          ++frame_count;
        }
        GradientBundle g = backward(fr.cache);
        std::vector<ParamRef> from = param_refs(g.params);
        std::vector<ParamRef> to = param_refs(accum.params);
        for (std::size_t r = 0; r < from.size(); ++r)
          for (std::size_t i = 0; i < from[r].size; ++i)
            to[r].data[i] += inv_batch * from[r].data[i];
        if (ecfg.loss == LossKind::softmax)
          for (std::size_t i = 0; i < g.table.size(); ++i)
            accum.table.data[i] += inv_batch * g.table.data[i];
        batch_embeddings.emplace_back(fr.cache.embedding, video.label);
      }
      if (!finite) break;

      std::vector<ParamRef> prefs = param_refs(out.params);
      std::vector<ParamRef> grefs = param_refs(accum.params);
      if (ecfg.loss == LossKind::softmax) {
        prefs.push_back({"oim.table", out.state.table.data.data(), out.state.table.size()});
        grefs.push_back({"oim.table", accum.table.data.data(), accum.table.size()});
      }
      if (velocity.size() != prefs.size()) {
        velocity.assign(prefs.size(), VecD());
        for (std::size_t r = 0; r < prefs.size(); ++r) velocity[r].assign(prefs[r].size, 0.0);
      }
      for (std::size_t r = 0; r < prefs.size(); ++r) {
        for (std::size_t i = 0; i < prefs[r].size; ++i) {
          velocity[r][i] = hp.sgd_momentum * velocity[r][i] + grefs[r].data[i];
          prefs[r].data[i] -= lr * velocity[r][i];
        }
      }
      // Lookup-table update after the optimizer step, in batch order.
      if (ecfg.loss == LossKind::oim)
        for (const auto& [embedding, label] : batch_embeddings)
          oim_update(out.state, embedding, label);
    }

    if (!finite) {
      out.params = snapshot_params;
      out.state = snapshot_state;
      out.diverged = true;
      out.diverged_epoch = epoch;
      break;
    }

    EpochMetrics em;
    em.epoch = epoch;
    const double inv_videos = 1.0 / static_cast<double>(order.size());
    em.loss = sum_loss * inv_videos;
    em.oim_loss = sum_oim * inv_videos;
    em.penalty = sum_pen * inv_videos;
    em.mean_bhattacharyya = frame_count ? sum_bc / static_cast<double>(frame_count) : 0.0;
    const RetrievalScores rs = score_retrieval(ds, split, out.params, ecfg);
    em.rank1 = rs.rank1;
    em.map = rs.map;
    out.history.push_back(em);
    metrics << em.epoch << "," << detail::format_double(em.loss) << ","
            << detail::format_double(em.oim_loss) << "," << detail::format_double(em.penalty)
            << "," << detail::format_double(em.mean_bhattacharyya) << ","
            << detail::format_double(em.rank1) << "," << detail::format_double(em.map) << "\n";
  }

  out.metrics_csv = metrics.str();
  return out;
}

inline Dataset build_dataset(const RunConfig& cfg) {
  if (!cfg.data_dir.empty()) return load_dataset(cfg.data_dir);
  return dataset_from_synthetic(make_synthetic(cfg.synth_spec()));
}

}  // namespace dsta
