#include "oostraj/nn.hpp"

#include <cmath>

#include "oostraj/error.hpp"

namespace oostraj::nn {

using namespace oostraj::ad;

std::size_t count_parameters(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.size();
  return n;
}

Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> data(numel(shape));
  for (auto& x : data) x = rng.uniform(-bound, bound);
  return Tensor::from(std::move(shape), std::move(data), true);
}

// ---------------------------------------------------------------- Linear

Linear::Linear(std::size_t in, std::size_t out, Rng& rng)
    : weight_(init_uniform({in, out}, in, rng)), bias_(Tensor::zeros({out}, true)) {}

Tensor Linear::operator()(const Tensor& x) const { return add_row(matmul(x, weight_), bias_); }

void Linear::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", weight_});
  out.push_back({prefix + ".bias", bias_});
}

// ---------------------------------------------------------------- LayerNorm

LayerNorm::LayerNorm(std::size_t width) : gain_(Tensor::full({width}, 1.0, true)), bias_(Tensor::zeros({width}, true)) {}

Tensor LayerNorm::operator()(const Tensor& x) const { return layer_norm_rows(x, gain_, bias_); }

void LayerNorm::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".gain", gain_});
  out.push_back({prefix + ".bias", bias_});
}

Tensor sinusoidal_encoding(std::size_t T, std::size_t d) {
  std::vector<double> pe(T * d);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
      pe[t * d + i] = std::sin(static_cast<double>(t) * freq);
      if (i + 1 < d) pe[t * d + i + 1] = std::cos(static_cast<double>(t) * freq);
    }
  }
  return Tensor::from({T, d}, std::move(pe));
}

// ---------------------------------------------------------------- attention

MultiHeadAttention::MultiHeadAttention(std::size_t width, std::size_t heads, Rng& rng)
    : width_(width), heads_(heads), qkv_(width, 3 * width, rng), proj_(width, width, rng) {
  if (heads == 0 || width % heads != 0)
    throw Error(Errc::InvalidConfig, "width " + std::to_string(width) + " not divisible by heads " + std::to_string(heads));
}

Tensor MultiHeadAttention::operator()(const Tensor& x) const {
  const Tensor qkv = qkv_(x);
  const std::size_t hd = width_ / heads_;
  std::vector<Tensor> outs;
  outs.reserve(heads_);
  for (std::size_t h = 0; h < heads_; ++h) {
    const Tensor q = slice_cols(qkv, h * hd, (h + 1) * hd);
    const Tensor k = slice_cols(qkv, width_ + h * hd, width_ + (h + 1) * hd);
    const Tensor v = slice_cols(qkv, 2 * width_ + h * hd, 2 * width_ + (h + 1) * hd);
    outs.push_back(attention_block(q, k, v));
  }
  return proj_(heads_ == 1 ? outs.front() : concat_cols(outs));
}

void MultiHeadAttention::collect(const std::string& prefix, ParamList& out) const {
  qkv_.collect(prefix + ".qkv", out);
  proj_.collect(prefix + ".proj", out);
}

TransformerBlock::TransformerBlock(std::size_t width, std::size_t heads, std::size_t ffn_mult, Rng& rng)
    : ln_attn_(width),
      ln_ffn_(width),
      attn_(width, heads, rng),
      ffn_in_(width, ffn_mult * width, rng),
      ffn_out_(ffn_mult * width, width, rng) {}

Tensor TransformerBlock::operator()(const Tensor& x) const {
  const Tensor h = add(x, attn_(ln_attn_(x)));
  return add(h, ffn_out_(relu(ffn_in_(ln_ffn_(h)))));
}

void TransformerBlock::collect(const std::string& prefix, ParamList& out) const {
  ln_attn_.collect(prefix + ".ln_attn", out);
  attn_.collect(prefix + ".attn", out);
  ln_ffn_.collect(prefix + ".ln_ffn", out);
  ffn_in_.collect(prefix + ".ffn_in", out);
  ffn_out_.collect(prefix + ".ffn_out", out);
}

// ---------------------------------------------------------------- recurrent

CellKind parse_cell_kind(std::string_view name) {
  if (name == "rnn") return CellKind::Rnn;
  if (name == "gru") return CellKind::Gru;
  if (name == "lstm") return CellKind::Lstm;
  throw Error(Errc::UnknownCellKind, "'" + std::string(name) + "' (expected rnn, gru or lstm)");
}

std::string_view cell_kind_name(CellKind kind) {
  switch (kind) {
    case CellKind::Rnn: return "rnn";
    case CellKind::Gru: return "gru";
    case CellKind::Lstm: return "lstm";
  }
  return "?";
}

RecurrentCell::RecurrentCell(CellKind kind, std::size_t in, std::size_t hidden, Rng& rng)
    : kind_(kind), in_(in), hidden_(hidden) {
  const std::size_t gh = gates() * hidden;
  w_x_ = init_uniform({in, gh}, in, rng);
  w_h_ = init_uniform({hidden, gh}, hidden, rng);
  b_x_ = Tensor::zeros({gh}, true);
  b_h_ = Tensor::zeros({gh}, true);
}

std::size_t RecurrentCell::gates() const {
  switch (kind_) {
    case CellKind::Rnn: return 1;
    case CellKind::Gru: return 3;
    case CellKind::Lstm: return 4;
  }
  return 1;
}

CellState RecurrentCell::initial_state() const {
  CellState s{Tensor::zeros({1, hidden_}), {}};
  if (kind_ == CellKind::Lstm) s.c = Tensor::zeros({1, hidden_});
  return s;
}

Tensor RecurrentCell::project_inputs(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(1) != in_)
    throw Error(Errc::ShapeMismatch, "recurrent input " + shape_str(x.shape()) + ", cell expects width " + std::to_string(in_));
  return add_row(matmul(x, w_x_), b_x_);
}

CellState RecurrentCell::step(const Tensor& x_t, const CellState& state) const {
  return step_projected(project_inputs(x_t), state);
}

CellState RecurrentCell::step_projected(const Tensor& xw, const CellState& state) const {
  const std::size_t H = hidden_;
  if (!state.h.defined() || state.h.shape() != Shape{1, H})
    throw Error(Errc::ShapeMismatch, "recurrent state must be [1x" + std::to_string(H) + "]");
  if (xw.shape() != Shape{1, gates() * H})
    throw Error(Errc::ShapeMismatch, "projected input " + shape_str(xw.shape()) + " for " + std::to_string(gates()) + " gates");
  const Tensor hw = add_row(matmul(state.h, w_h_), b_h_);
  auto gate = [H](const Tensor& t, std::size_t g) { return slice_cols(t, g * H, (g + 1) * H); };
  switch (kind_) {
    case CellKind::Rnn:
      return {tanh(add(xw, hw)), {}};
    case CellKind::Gru: {
      const Tensor r = sigmoid(add(gate(xw, 0), gate(hw, 0)));
      const Tensor z = sigmoid(add(gate(xw, 1), gate(hw, 1)));
      const Tensor n = tanh(add(gate(xw, 2), mul(r, gate(hw, 2))));
      // h' = (1 - z) * n + z * h = n + z * (h - n)
      return {add(n, mul(z, sub(state.h, n))), {}};
    }
    case CellKind::Lstm: {
      if (!state.c.defined() || state.c.shape() != Shape{1, H})
        throw Error(Errc::ShapeMismatch, "LSTM cell state must be [1x" + std::to_string(H) + "]");
      const Tensor pre = add(xw, hw);
      const Tensor i = sigmoid(gate(pre, 0));
      const Tensor f = sigmoid(gate(pre, 1));
      const Tensor g = tanh(gate(pre, 2));
      const Tensor o = sigmoid(gate(pre, 3));
      const Tensor c = add(mul(f, state.c), mul(i, g));
      return {mul(o, tanh(c)), c};
    }
  }
  throw Error(Errc::UnknownCellKind, "corrupt cell kind");
}

void RecurrentCell::collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".w_x", w_x_});
  out.push_back({prefix + ".w_h", w_h_});
  out.push_back({prefix + ".b_x", b_x_});
  out.push_back({prefix + ".b_h", b_h_});
}

// ---------------------------------------------------------------- trunk

TrunkKind parse_trunk_kind(std::string_view name) {
  if (name == "transformer") return TrunkKind::Transformer;
  if (name == "lstm") return TrunkKind::Lstm;
  if (name == "gru") return TrunkKind::Gru;
  if (name == "rnn") return TrunkKind::Rnn;
  throw Error(Errc::UnknownCellKind, "'" + std::string(name) + "' (expected transformer, lstm, gru or rnn)");
}

std::string_view trunk_kind_name(TrunkKind kind) {
  switch (kind) {
    case TrunkKind::Transformer: return "transformer";
    case TrunkKind::Lstm: return "lstm";
    case TrunkKind::Gru: return "gru";
    case TrunkKind::Rnn: return "rnn";
  }
  return "?";
}

SequenceTrunk::SequenceTrunk(TrunkKind kind, std::size_t in, const TrunkConfig& cfg, Rng& rng)
    : kind_(kind), cfg_(cfg), input_(in, cfg.width, rng) {
  if (kind == TrunkKind::Transformer) {
    for (std::size_t l = 0; l < cfg.layers; ++l) blocks_.emplace_back(cfg.width, cfg.heads, cfg.ffn_mult, rng);
    final_norm_ = LayerNorm(cfg.width);
  } else {
    const CellKind ck = kind == TrunkKind::Lstm ? CellKind::Lstm : kind == TrunkKind::Gru ? CellKind::Gru : CellKind::Rnn;
    for (std::size_t l = 0; l < cfg.layers; ++l) cells_.emplace_back(ck, cfg.width, cfg.width, rng);
  }
}

Tensor SequenceTrunk::operator()(const Tensor& x) const {
  Tensor h = input_(x);
  if (kind_ == TrunkKind::Transformer) {
    h = add(h, sinusoidal_encoding(h.dim(0), h.dim(1)));
    for (const auto& b : blocks_) h = b(h);
    return final_norm_(h);
  }
  const std::size_t T = h.dim(0);
  for (const auto& cell : cells_) {
    const Tensor xw = cell.project_inputs(h);
    CellState s = cell.initial_state();
    std::vector<Tensor> outs;
    outs.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
      s = cell.step_projected(slice_rows(xw, t, t + 1), s);
      outs.push_back(s.h);
    }
    h = concat_rows(outs);
  }
  return h;
}

void SequenceTrunk::collect(const std::string& prefix, ParamList& out) const {
  input_.collect(prefix + ".input", out);
  for (std::size_t l = 0; l < blocks_.size(); ++l) blocks_[l].collect(prefix + ".block" + std::to_string(l), out);
  if (kind_ == TrunkKind::Transformer) final_norm_.collect(prefix + ".final_norm", out);
  for (std::size_t l = 0; l < cells_.size(); ++l) cells_[l].collect(prefix + ".cell" + std::to_string(l), out);
}

}  // namespace oostraj::nn
