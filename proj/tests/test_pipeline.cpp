#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dsta/pipeline.hpp"
#include "test_helpers.hpp"

using namespace dsta;
using dsta::test::random_params;
using dsta::test::random_sample;
using dsta::test::random_state;

namespace {

// Straight-line re-implementation of the whole objective with plain loops;
// shares nothing with the pipeline code path.
double oracle_total_loss(const VideoSample& sample, const ModelParams& P, const OimState& st,
                         std::size_t label, const Hyperparams& hp) {
  const std::size_t N = hp.chunks, K = hp.heads, L = hp.cell_count(), D = hp.feature_dim,
                    H = hp.hidden_dim, E = hp.embed_dim, C = st.identity_count();

  auto plain_softmax = [](std::vector<double> v) {
    double sum = 0.0;
    for (double& x : v) {
      x = std::exp(x);
      sum += x;
    }
    for (double& x : v) x /= sum;
    return v;
  };

  // Spatial attention: S[n][k][l] and gated features x[n][k][:].
  std::vector<std::vector<std::vector<double>>> S(N);
  std::vector<std::vector<std::vector<double>>> gated(N);
  for (std::size_t n = 0; n < N; ++n) {
    S[n].resize(K);
    gated[n].assign(K, std::vector<double>(D, 0.0));
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<double> e(L);
      for (std::size_t l = 0; l < L; ++l) {
        double resp = P.spatial[k].b_out;
        for (std::size_t i = 0; i < H; ++i) {
          double pre = P.spatial[k].b_s[i];
          for (std::size_t j = 0; j < D; ++j)
            pre += P.spatial[k].W_s(i, j) * sample.grids[n].cells(l, j);
          if (pre > 0.0) resp += P.spatial[k].w_out[i] * pre;
        }
        e[l] = resp;
      }
      S[n][k] = plain_softmax(e);
      for (std::size_t l = 0; l < L; ++l)
        for (std::size_t j = 0; j < D; ++j)
          gated[n][k][j] += S[n][k][l] * sample.grids[n].cells(l, j);
    }
  }

  // Enhancement: Xhat_k = fcn_W (X_k C_k) + fcn_b + X_k.
  std::vector<std::vector<std::vector<double>>> xhat(N,
      std::vector<std::vector<double>>(K, std::vector<double>(D, 0.0)));
  if (hp.enhancement) {
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<std::vector<double>> a(N, std::vector<double>(N));
      for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < N; ++j) {
          double phi = 0.0;
          for (std::size_t t = 0; t < D; ++t) phi += gated[i][k][t] * gated[j][k][t];
          const double dist = i > j ? double(i - j) : double(j - i);
          a[i][j] = phi + P.enhancement.W_pos(i, j) * std::exp(-dist / P.enhancement.sigma) +
                    P.enhancement.b_pos[j];
        }
        a[i] = plain_softmax(a[i]);
      }
      for (std::size_t m = 0; m < N; ++m) {
        std::vector<double> pooled(D, 0.0);
        for (std::size_t t = 0; t < N; ++t)
          for (std::size_t j = 0; j < D; ++j) pooled[j] += gated[t][k][j] * a[t][m];
        for (std::size_t i = 0; i < D; ++i) {
          double acc = P.enhancement.fcn_b[i] + gated[m][k][i];
          for (std::size_t j = 0; j < D; ++j) acc += P.enhancement.fcn_W(i, j) * pooled[j];
          xhat[m][k][i] = acc;
        }
      }
    }
  } else {
    xhat = gated;
  }

  // Temporal attention and concatenation.
  std::vector<double> concat;
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<double> e(N);
    for (std::size_t n = 0; n < N; ++n) {
      e[n] = P.temporal[k].b_t;
      for (std::size_t i = 0; i < D; ++i) e[n] += P.temporal[k].w_t[i] * xhat[n][k][i];
    }
    const std::vector<double> t = plain_softmax(e);
    std::vector<double> xk(D, 0.0);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t i = 0; i < D; ++i) xk[i] += t[n] * xhat[n][k][i];
    concat.insert(concat.end(), xk.begin(), xk.end());
  }

  // Embedding.
  std::vector<double> z(E);
  for (std::size_t i = 0; i < E; ++i) {
    z[i] = P.embedding.b_e[i];
    for (std::size_t j = 0; j < concat.size(); ++j) z[i] += P.embedding.W_e(i, j) * concat[j];
  }
  double zn = 0.0;
  for (double v : z) zn += v * v;
  zn = std::sqrt(zn);
  for (double& v : z) v /= zn;

  // OIM loss.
  std::vector<double> logits(C);
  for (std::size_t i = 0; i < C; ++i) {
    logits[i] = 0.0;
    for (std::size_t j = 0; j < E; ++j) logits[i] += st.table(i, j) * z[j];
    logits[i] /= st.temperature;
  }
  const std::vector<double> p = plain_softmax(logits);
  double total = -std::log(p[label]);

  // Diversity penalty summed over frames.
  for (std::size_t n = 0; n < N; ++n) {
    double q = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
      for (std::size_t j = 0; j < K; ++j) {
        double g = i == j ? -1.0 : 0.0;
        for (std::size_t l = 0; l < L; ++l) {
          if (hp.penalty == PenaltyKind::q)
            g += std::sqrt(S[n][i][l] * S[n][j][l]);
          else if (hp.penalty == PenaltyKind::qprime)
            g += S[n][i][l] * S[n][j][l];
        }
        q += g * g;
      }
    }
    if (hp.penalty != PenaltyKind::none) total += hp.lambda_div * q;
  }
  return total;
}

Hyperparams tiny_hp() {
  Hyperparams hp;
  hp.chunks = 3;
  hp.heads = 2;
  hp.grid_h = 2;
  hp.grid_w = 2;
  hp.feature_dim = 5;
  hp.hidden_dim = 3;
  hp.embed_dim = 4;
  hp.lambda_div = 0.1;
  hp.penalty = PenaltyKind::q;
  return hp;
}

}  // namespace

TEST_CASE("forward matches a straight-line re-implementation") {
  Rng rng(60);
  for (int trial = 0; trial < 10; ++trial) {
    Hyperparams hp = tiny_hp();
    hp.enhancement = trial % 2 == 0;
    hp.penalty = trial % 3 == 0 ? PenaltyKind::qprime : PenaltyKind::q;
    ModelParams params = random_params(hp, rng);
    const OimState state = random_state(3, hp, rng);
    const VideoSample sample = random_sample(hp, rng);
    const std::size_t label = rng.uniform_index(3);

    const ForwardResult fr = forward(sample, params, state, label, hp);
    const double oracle = oracle_total_loss(sample, params, state, label, hp);
    CHECK(std::abs(fr.report.total - oracle) <= 1e-10);
    CHECK(fr.report.total ==
          Catch::Approx(fr.report.oim_loss + hp.lambda_div * fr.report.diversity_penalty)
              .margin(1e-12));
  }
}

TEST_CASE("uniform attention with average pooling reduces to the mean-pool baseline") {
  Rng rng(61);
  Hyperparams hp = tiny_hp();
  hp.heads = 1;
  hp.spatial_mode = SpatialMode::uniform;
  hp.temporal_mode = TemporalMode::average;
  hp.penalty = PenaltyKind::none;
  hp.lambda_div = 0.0;

  for (bool enh : {true, false}) {
    hp.enhancement = enh;
    ModelParams params = random_params(hp, rng);
    // zero FCN: enhancement becomes the identity map
    std::fill(params.enhancement.fcn_W.data.begin(), params.enhancement.fcn_W.data.end(), 0.0);
    std::fill(params.enhancement.fcn_b.begin(), params.enhancement.fcn_b.end(), 0.0);
    const OimState state = random_state(4, hp, rng);
    const VideoSample sample = random_sample(hp, rng);

    const ForwardResult fr = forward(sample, params, state, 2, hp);

    // Directly coded baseline: embed the global mean feature, then OIM.
    VecD mean(hp.feature_dim, 0.0);
    for (const FrameFeatureGrid& g : sample.grids)
      for (std::size_t l = 0; l < hp.cell_count(); ++l)
        for (std::size_t j = 0; j < hp.feature_dim; ++j) mean[j] += g.cells(l, j);
    for (double& v : mean)
      v /= static_cast<double>(hp.chunks * hp.cell_count());
    VecD z = matvec(params.embedding.W_e, mean);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += params.embedding.b_e[i];
    const double baseline = oim_forward(l2_normalize(z), 2, state).loss;

    CHECK(std::abs(fr.report.total - baseline) <= 1e-10);
  }
}

TEST_CASE("duplicated frames give uniform temporal weights and an N-independent descriptor") {
  Rng rng(62);
  Hyperparams hp3 = tiny_hp();
  hp3.chunks = 3;
  ModelParams params = random_params(hp3, rng);
  // Positional terms zero (the shipped initialization); appearance
  // similarity alone keeps identical frames symmetric.
  std::fill(params.enhancement.W_pos.data.begin(), params.enhancement.W_pos.data.end(), 0.0);
  std::fill(params.enhancement.b_pos.begin(), params.enhancement.b_pos.end(), 0.0);

  FrameFeatureGrid g(hp3.grid_h, hp3.grid_w, hp3.feature_dim);
  for (double& v : g.cells.data) v = rng.normal();

  const VideoSample s3 = make_video_sample({g, g, g}, {0, 1, 2});
  const DescribeResult d3 = describe(s3, params, hp3);
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t k = 0; k < hp3.heads; ++k)
      CHECK(d3.temporal_weights(n, k) == Catch::Approx(1.0 / 3.0).margin(1e-12));

  Hyperparams hp6 = hp3;
  hp6.chunks = 6;
  ModelParams params6 = params;
  params6.enhancement.W_pos = Mat(6, 6);
  params6.enhancement.b_pos.assign(6, 0.0);
  const VideoSample s6 = make_video_sample({g, g, g, g, g, g}, {0, 1, 2, 3, 4, 5});
  const DescribeResult d6 = describe(s6, params6, hp6);
  for (std::size_t i = 0; i < d3.embedding.size(); ++i)
    CHECK(d3.embedding[i] == Catch::Approx(d6.embedding[i]).margin(1e-12));
}

TEST_CASE("identical table rows give exactly zero gradients") {
  Rng rng(63);
  Hyperparams hp = tiny_hp();
  hp.lambda_div = 0.0;
  hp.penalty = PenaltyKind::none;
  ModelParams params = random_params(hp, rng);
  OimState state = make_oim_state(3, hp.embed_dim, hp.tau, hp.gamma);
  VecD row = l2_normalize({1.0, 1.0, -1.0, 0.5});
  for (std::size_t i = 0; i < 3; ++i) std::copy(row.begin(), row.end(), state.table.row(i));

  const ForwardResult fr = forward(random_sample(hp, rng), params, state, 1, hp);
  CHECK(fr.report.total == Catch::Approx(std::log(3.0)).margin(1e-12));
  const GradientBundle g = backward(fr.cache);
  double worst = 0.0;
  for (const ParamRef& ref : param_refs(const_cast<ModelParams&>(g.params)))
    for (std::size_t i = 0; i < ref.size; ++i) worst = std::max(worst, std::abs(ref.data[i]));
  CHECK(worst < 1e-8);
}

TEST_CASE("analytic gradients match finite differences across configurations") {
  Rng rng(64);
  struct Variant {
    PenaltyKind penalty;
    bool enhancement;
    LossKind loss;
    TemporalMode tmode;
  };
  const std::vector<Variant> variants = {
      {PenaltyKind::q, true, LossKind::oim, TemporalMode::attention},
      {PenaltyKind::qprime, true, LossKind::oim, TemporalMode::attention},
      {PenaltyKind::none, false, LossKind::oim, TemporalMode::attention},
      {PenaltyKind::q, false, LossKind::softmax, TemporalMode::attention},
      {PenaltyKind::q, true, LossKind::oim, TemporalMode::max},
  };
  for (const Variant& v : variants) {
    Hyperparams hp = tiny_hp();
    hp.penalty = v.penalty;
    hp.enhancement = v.enhancement;
    hp.loss = v.loss;
    hp.temporal_mode = v.tmode;
    ModelParams params = random_params(hp, rng);
    const OimState state = random_state(3, hp, rng);
    const VideoSample sample = random_sample(hp, rng);
    Rng coords(991);
    const GradCheckReport report =
        grad_check(params, state, sample, rng.uniform_index(3), hp, 1e-5, coords);
    INFO("penalty " << static_cast<int>(v.penalty) << " enh " << v.enhancement << " loss "
                    << static_cast<int>(v.loss) << " tmode " << static_cast<int>(v.tmode));
    CHECK(report.worst < 1e-4);
  }
}

TEST_CASE("gradient of the penalty-only objective matches finite differences") {
  // All-equal table rows silence the classification gradient; lambda = 1
  // leaves the diversity penalty as the whole learning signal.
  Rng rng(65);
  Hyperparams hp = tiny_hp();
  hp.lambda_div = 1.0;
  hp.penalty = PenaltyKind::q;
  ModelParams params = random_params(hp, rng);
  OimState state = make_oim_state(3, hp.embed_dim, hp.tau, hp.gamma);
  VecD row = l2_normalize({0.3, -0.2, 0.9, 0.1});
  for (std::size_t i = 0; i < 3; ++i) std::copy(row.begin(), row.end(), state.table.row(i));

  Rng coords(992);
  const GradCheckReport report =
      grad_check(params, state, random_sample(hp, rng), 0, hp, 1e-5, coords);
  CHECK(report.worst < 1e-4);
}

TEST_CASE("linear temporal normalization gradients match finite differences") {
  Rng rng(66);
  Hyperparams hp = tiny_hp();
  hp.temporal_norm = TemporalNorm::linear;
  ModelParams params = random_params(hp, rng, 0.1);
  for (auto& head : params.temporal) head.b_t = 5.0;  // keep response sums positive
  const OimState state = random_state(3, hp, rng);
  Rng coords(993);
  const GradCheckReport report =
      grad_check(params, state, random_sample(hp, rng), 1, hp, 1e-5, coords);
  CHECK(report.worst < 1e-4);
}

TEST_CASE("a corrupted gradient entry is caught by the finite-difference comparison") {
  Rng rng(67);
  Hyperparams hp = tiny_hp();
  ModelParams params = random_params(hp, rng);
  const OimState state = random_state(3, hp, rng);
  const VideoSample sample = random_sample(hp, rng);

  const ForwardResult fr = forward(sample, params, state, 0, hp);
  GradientBundle g = backward(fr.cache);

  // Pick a coordinate with a solidly nonzero gradient: the embedding bias.
  std::size_t idx = 0;
  for (std::size_t i = 0; i < g.params.embedding.b_e.size(); ++i)
    if (std::abs(g.params.embedding.b_e[i]) > std::abs(g.params.embedding.b_e[idx])) idx = i;
  REQUIRE(std::abs(g.params.embedding.b_e[idx]) > 1e-4);

  const double eps = 1e-5;
  const double saved = params.embedding.b_e[idx];
  params.embedding.b_e[idx] = saved + eps;
  const double f_plus = forward(sample, params, state, 0, hp).report.total;
  params.embedding.b_e[idx] = saved - eps;
  const double f_minus = forward(sample, params, state, 0, hp).report.total;
  params.embedding.b_e[idx] = saved;
  const double numeric = (f_plus - f_minus) / (2.0 * eps);

  const double honest = g.params.embedding.b_e[idx];
  const double corrupted = 2.0 * honest;
  const double rel_honest =
      std::abs(honest - numeric) / std::max({std::abs(honest), std::abs(numeric), 1e-8});
  const double rel_corrupted =
      std::abs(corrupted - numeric) / std::max({std::abs(corrupted), std::abs(numeric), 1e-8});
  CHECK(rel_honest < 1e-4);
  CHECK(rel_corrupted > 1e-2);
}

TEST_CASE("backward rejects stale or foreign caches") {
  Rng rng(68);
  Hyperparams hp = tiny_hp();
  ModelParams params = random_params(hp, rng);
  const OimState state = random_state(3, hp, rng);
  ForwardResult fr = forward(random_sample(hp, rng), params, state, 0, hp);

  params.embedding.b_e[0] += 1.0;  // mutate after forward
  try {
    backward(fr.cache);
    FAIL("expected contract violation");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::contract_violation);
  }
  params.embedding.b_e[0] -= 1.0;
  CHECK_NOTHROW(backward(fr.cache));

  ForwardCache empty;
  CHECK_THROWS_AS(backward(empty), Error);
}

TEST_CASE("swapping heads permutes receptive fields and head features") {
  Rng rng(69);
  Hyperparams hp = tiny_hp();  // K = 2
  ModelParams params = random_params(hp, rng);
  const VideoSample sample = random_sample(hp, rng);
  const DescribeResult a = describe(sample, params, hp);

  ModelParams swapped = params;
  std::swap(swapped.spatial[0], swapped.spatial[1]);
  std::swap(swapped.temporal[0], swapped.temporal[1]);
  const DescribeResult b = describe(sample, swapped, hp);

  for (std::size_t n = 0; n < hp.chunks; ++n) {
    for (std::size_t l = 0; l < hp.cell_count(); ++l) {
      CHECK(a.fields[n](0, l) == b.fields[n](1, l));
      CHECK(a.fields[n](1, l) == b.fields[n](0, l));
    }
    CHECK(a.temporal_weights(n, 0) == b.temporal_weights(n, 1));
    CHECK(a.temporal_weights(n, 1) == b.temporal_weights(n, 0));
  }
}

TEST_CASE("grad_check validates its step size and reports non-finite objectives") {
  Rng rng(70);
  Hyperparams hp = tiny_hp();
  ModelParams params = random_params(hp, rng);
  const OimState state = random_state(3, hp, rng);
  const VideoSample sample = random_sample(hp, rng);
  Rng coords(994);
  CHECK_THROWS_AS(grad_check(params, state, sample, 0, hp, 1e-2, coords), Error);

  // A label row opposed to the embedding with a tiny temperature
  // underflows the label probability to zero, so the objective goes
  // non-finite and the checker reports the offending group.
  Hyperparams hot = hp;
  hot.tau = 1e-4;
  ModelParams aligned = random_params(hot, rng);
  const VecD emb = describe(sample, aligned, hot).embedding;
  OimState cold = make_oim_state(2, hp.embed_dim, hot.tau, hot.gamma);
  for (std::size_t j = 0; j < emb.size(); ++j) {
    cold.table(0, j) = -emb[j];
    cold.table(1, j) = emb[j];
  }
  try {
    grad_check(aligned, cold, sample, 0, hot, 1e-5, coords);
    FAIL("expected numeric failure");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::numeric_failure);
  }
}
