#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "oostraj/rng.hpp"
#include "oostraj/tensor.hpp"

namespace oostraj::nn {

using ad::Tensor;

struct NamedParam {
  std::string name;
  Tensor tensor;
};
using ParamList = std::vector<NamedParam>;

std::size_t count_parameters(const ParamList& params);

/// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), marked trainable.
Tensor init_uniform(ad::Shape shape, std::size_t fan_in, Rng& rng);

class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng);

  /// x: [T x in] -> [T x out]
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;

  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  std::size_t in_features() const { return weight_.dim(0); }
  std::size_t out_features() const { return weight_.dim(1); }

 private:
  Tensor weight_;  // [in x out]
  Tensor bias_;    // [out]
};

class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(std::size_t width);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  Tensor gain_, bias_;
};

/// Fixed sinusoidal table [T x d].
Tensor sinusoidal_encoding(std::size_t T, std::size_t d);

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(std::size_t width, std::size_t heads, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  std::size_t width_ = 0, heads_ = 1;
  Linear qkv_, proj_;
};

/// Pre-layer-norm block: x + MHA(LN(x)), then x + FFN(LN(x)).
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(std::size_t width, std::size_t heads, std::size_t ffn_mult, Rng& rng);
  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;

 private:
  LayerNorm ln_attn_, ln_ffn_;
  MultiHeadAttention attn_;
  Linear ffn_in_, ffn_out_;
};

enum class CellKind { Rnn, Gru, Lstm };

CellKind parse_cell_kind(std::string_view name);  // throws Error(UnknownCellKind)
std::string_view cell_kind_name(CellKind kind);

struct CellState {
  Tensor h;  // [1 x hidden]
  Tensor c;  // [1 x hidden], LSTM only
};

/// Elman RNN, GRU (reset/update/new gate order) and LSTM (input/forget/cell/output).
class RecurrentCell {
 public:
  RecurrentCell() = default;
  RecurrentCell(CellKind kind, std::size_t in, std::size_t hidden, Rng& rng);

  CellKind kind() const { return kind_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t gates() const;

  CellState initial_state() const;
  /// x_t: [1 x in]
  CellState step(const Tensor& x_t, const CellState& state) const;
  /// Same update with x_t·W_x + b_x already computed ([1 x gates*hidden]).
  CellState step_projected(const Tensor& xw, const CellState& state) const;
  Tensor project_inputs(const Tensor& x) const;  // [T x in] -> [T x gates*hidden]

  void collect(const std::string& prefix, ParamList& out) const;

  Tensor& w_x() { return w_x_; }
  Tensor& w_h() { return w_h_; }
  Tensor& b_x() { return b_x_; }
  Tensor& b_h() { return b_h_; }

 private:
  CellKind kind_ = CellKind::Rnn;
  std::size_t in_ = 0, hidden_ = 0;
  Tensor w_x_, w_h_, b_x_, b_h_;
};

enum class TrunkKind { Transformer, Lstm, Gru, Rnn };

TrunkKind parse_trunk_kind(std::string_view name);
std::string_view trunk_kind_name(TrunkKind kind);

struct TrunkConfig {
  std::size_t width = 64;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ffn_mult = 4;
};

/// Sequence-to-sequence trunk: input projection to `width`, then either
/// transformer blocks (with positional encoding and a final layer norm) or
/// stacked recurrent layers. [T x in] -> [T x width].
class SequenceTrunk {
 public:
  SequenceTrunk() = default;
  SequenceTrunk(TrunkKind kind, std::size_t in, const TrunkConfig& cfg, Rng& rng);

  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParamList& out) const;
  TrunkKind kind() const { return kind_; }
  std::size_t width() const { return cfg_.width; }

 private:
  TrunkKind kind_ = TrunkKind::Transformer;
  TrunkConfig cfg_;
  Linear input_;
  std::vector<TransformerBlock> blocks_;
  LayerNorm final_norm_;
  std::vector<RecurrentCell> cells_;
};

}  // namespace oostraj::nn
