#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "gsn/encoder.hpp"
#include "gsn/gradcheck.hpp"

using gsn::ParamRegistry;
using gsn::Shape;
using gsn::Tape;
using gsn::Tensor;
using gsn::Var;

namespace {

struct Fixture {
  ParamRegistry<double> reg;
  int d_h, d_e, layers, vocab;

  Fixture(int d_h_, int d_e_, int layers_, int vocab_, unsigned seed, bool zero_weights = false)
      : d_h(d_h_), d_e(d_e_), layers(layers_), vocab(vocab_) {
    std::mt19937_64 rng(seed);
    reg.add("embed", gsn::uniform_tensor<double>(Shape{vocab, d_e}, -0.8, 0.8, rng));
    gsn::register_bilstm<double>(reg, "enc", d_e, d_h, layers, rng);
    if (zero_weights)
      for (auto& p : reg)
        if (p.name != "embed") p.value.fill(0.0);
  }

  gsn::EncodedUtterance encode(Tape<double>& tape, const std::vector<int>& tokens) {
    Var embed = tape.leaf(&reg.at("embed").value, &reg.at("embed").grad);
    auto layer_vars = gsn::bind_bilstm(tape, reg, "enc", layers);
    return gsn::encode_utterance(tape, embed, layer_vars, tokens, d_h);
  }
};

// Plain-loop LSTM evaluation, written independently of the tape code.
struct HandLstm {
  std::vector<double> w_ih, w_hh, b;  // row-major [4*d_h, in], [4*d_h, d_h]
  int in, d_h;

  static double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

  void step(const std::vector<double>& x, std::vector<double>& h, std::vector<double>& c) const {
    std::vector<double> pre(static_cast<std::size_t>(4 * d_h), 0.0);
    for (int r = 0; r < 4 * d_h; ++r) {
      double acc = b[static_cast<std::size_t>(r)];
      for (int k = 0; k < in; ++k) acc += w_ih[static_cast<std::size_t>(r * in + k)] * x[static_cast<std::size_t>(k)];
      for (int k = 0; k < d_h; ++k) acc += w_hh[static_cast<std::size_t>(r * d_h + k)] * h[static_cast<std::size_t>(k)];
      pre[static_cast<std::size_t>(r)] = acc;
    }
    for (int u = 0; u < d_h; ++u) {
      const double i = sig(pre[static_cast<std::size_t>(u)]);
      const double f = sig(pre[static_cast<std::size_t>(d_h + u)]);
      const double g = std::tanh(pre[static_cast<std::size_t>(2 * d_h + u)]);
      const double o = sig(pre[static_cast<std::size_t>(3 * d_h + u)]);
      c[static_cast<std::size_t>(u)] = f * c[static_cast<std::size_t>(u)] + i * g;
      h[static_cast<std::size_t>(u)] = o * std::tanh(c[static_cast<std::size_t>(u)]);
    }
  }
};

std::vector<double> tensor_vec(const Tensor<double>& t) {
  return {t.data(), t.data() + t.size()};
}

}  // namespace

TEST(Encoder, ZeroWeightsGiveZeroStates) {
  Fixture f(3, 2, 2, 6, 17, /*zero_weights=*/true);
  Tape<double> tape;
  const auto enc = f.encode(tape, {4, 5, 1});
  for (const Var& s : enc.word_states)
    for (std::int64_t i = 0; i < tape.val(s).size(); ++i) EXPECT_DOUBLE_EQ(tape.val(s)[i], 0.0);
  for (std::int64_t i = 0; i < tape.val(enc.summary).size(); ++i)
    EXPECT_DOUBLE_EQ(tape.val(enc.summary)[i], 0.0);
}

TEST(Encoder, SingleTokenSummaryEqualsOnlyWordState) {
  Fixture f(3, 2, 1, 6, 18);
  Tape<double> tape;
  const auto enc = f.encode(tape, {4});
  ASSERT_EQ(enc.word_states.size(), 1u);
  EXPECT_TRUE(tape.val(enc.summary) == tape.val(enc.word_states[0]));
}

TEST(Encoder, OutputDimensionIsTwiceHidden) {
  Fixture f(5, 3, 2, 9, 19);
  for (int n : {1, 2, 7}) {
    std::vector<int> tokens;
    for (int t = 0; t < n; ++t) tokens.push_back(4 + t % 5);
    Tape<double> tape;
    const auto enc = f.encode(tape, tokens);
    EXPECT_EQ(static_cast<int>(enc.word_states.size()), n);
    for (const Var& s : enc.word_states) EXPECT_EQ(tape.val(s).dim(0), 10);
    EXPECT_EQ(tape.val(enc.summary).dim(0), 10);
  }
}

TEST(Encoder, RejectsOutOfRangeTokenId) {
  Fixture f(2, 2, 1, 6, 20);
  Tape<double> tape;
  EXPECT_THROW(f.encode(tape, {6}), gsn::VocabError);
  EXPECT_THROW(f.encode(tape, {-1}), gsn::VocabError);
}

TEST(Encoder, MatchesHandEvaluation) {
  // d_h=2, n=2, one layer: states checked against the plain-loop oracle.
  Fixture f(2, 3, 1, 5, 21);
  const std::vector<int> tokens{1, 3};

  Tape<double> tape;
  const auto enc = f.encode(tape, tokens);

  HandLstm fwd{tensor_vec(f.reg.at("enc.l0.fwd.w_ih").value),
               tensor_vec(f.reg.at("enc.l0.fwd.w_hh").value),
               tensor_vec(f.reg.at("enc.l0.fwd.b").value), 3, 2};
  HandLstm bwd{tensor_vec(f.reg.at("enc.l0.bwd.w_ih").value),
               tensor_vec(f.reg.at("enc.l0.bwd.w_hh").value),
               tensor_vec(f.reg.at("enc.l0.bwd.b").value), 3, 2};
  const Tensor<double>& embed = f.reg.at("embed").value;
  auto embed_row = [&](int id) {
    return std::vector<double>{&embed.at(id, 0), &embed.at(id, 0) + 3};
  };

  std::vector<double> hf(2, 0.0), cf(2, 0.0), hb(2, 0.0), cb(2, 0.0);
  std::vector<std::vector<double>> fstates, bstates;
  for (int t = 0; t < 2; ++t) {
    fwd.step(embed_row(tokens[static_cast<std::size_t>(t)]), hf, cf);
    fstates.push_back(hf);
  }
  for (int t = 1; t >= 0; --t) {
    bwd.step(embed_row(tokens[static_cast<std::size_t>(t)]), hb, cb);
    bstates.insert(bstates.begin(), hb);
  }

  for (int t = 0; t < 2; ++t) {
    const Tensor<double>& s = tape.val(enc.word_states[static_cast<std::size_t>(t)]);
    for (int u = 0; u < 2; ++u) {
      EXPECT_NEAR(s[u], fstates[static_cast<std::size_t>(t)][static_cast<std::size_t>(u)], 1e-12);
      EXPECT_NEAR(s[2 + u], bstates[static_cast<std::size_t>(t)][static_cast<std::size_t>(u)], 1e-12);
    }
  }
  const Tensor<double>& sum = tape.val(enc.summary);
  for (int u = 0; u < 2; ++u) {
    EXPECT_NEAR(sum[u], fstates[1][static_cast<std::size_t>(u)], 1e-12);
    EXPECT_NEAR(sum[2 + u], bstates[0][static_cast<std::size_t>(u)], 1e-12);
  }
}

TEST(Encoder, ReversalSymmetry) {
  // Reversed tokens with swapped direction parameters reproduce the states in
  // reverse order with concatenation halves exchanged (single layer).
  Fixture f(3, 2, 1, 8, 22);
  const std::vector<int> tokens{4, 6, 5, 7};
  std::vector<int> reversed(tokens.rbegin(), tokens.rend());

  Tape<double> tape;
  Var embed = tape.leaf(&f.reg.at("embed").value, &f.reg.at("embed").grad);
  auto layers = gsn::bind_bilstm(tape, f.reg, "enc", 1);
  const auto direct = gsn::encode_utterance(tape, embed, layers, tokens, f.d_h);

  std::vector<gsn::BiLstmLayerVars> swapped{{layers[0].bwd, layers[0].fwd}};
  const auto mirrored = gsn::encode_utterance(tape, embed, swapped, reversed, f.d_h);

  const std::size_t n = tokens.size();
  for (std::size_t t = 0; t < n; ++t) {
    const Tensor<double>& a = tape.val(direct.word_states[t]);
    const Tensor<double>& b = tape.val(mirrored.word_states[n - 1 - t]);
    for (int u = 0; u < f.d_h; ++u) {
      EXPECT_DOUBLE_EQ(a[u], b[f.d_h + u]);
      EXPECT_DOUBLE_EQ(a[f.d_h + u], b[u]);
    }
  }
}

TEST(Encoder, GradientCheck) {
  Fixture f(3, 2, 2, 6, 23);
  const std::vector<int> tokens{4, 2, 5};
  auto run = [&](bool with_grad) {
    Tape<double> tape;
    const auto enc = f.encode(tape, tokens);
    std::vector<Var> sums;
    for (const Var& s : enc.word_states) sums.push_back(tape.sum(tape.tanh(s)));
    sums.push_back(tape.sum(enc.summary));
    Var loss = tape.sum(tape.stack(sums));
    if (with_grad) tape.backward(loss);
    return tape.scalar(loss);
  };
  const double err = gsn::finite_diff_check<double>(
      f.reg, [&] { return run(true); }, [&] { return run(false); }, 1e-5);
  EXPECT_LT(err, 1e-4);
}
