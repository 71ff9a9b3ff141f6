#include "bgg/tape.hpp"

#include <string_view>
#include <unordered_map>

#include "kernels.hpp"
#include "tensor_access.hpp"

namespace bgg {
namespace detail {

struct OpRecord {
  const char* name;
  std::vector<int> inputs;  // -1 for untracked inputs
  int output;
  BackwardFn backward;
};

struct TapeState {
  bool recording = true;
  std::vector<Shape> node_shapes;
  std::vector<OpRecord> ops;
  std::unordered_map<const Parameter*, Tensor> bound;

  int new_node(const Shape& shape) {
    node_shapes.push_back(shape);
    return static_cast<int>(node_shapes.size()) - 1;
  }
};

void GradSink::add(std::size_t input, Tensor grad) {
  if (!needs_[input]) return;
  if (!out_[input].defined()) {
    out_[input] = std::move(grad);
  } else {
    out_[input] = kernels::add(out_[input], grad);
  }
}

namespace {

std::shared_ptr<TapeState> tape_of(std::span<const Tensor* const> inputs) {
  std::shared_ptr<TapeState> found;
  for (const Tensor* t : inputs) {
    if (t == nullptr || t->node_id() < 0) continue;
    auto s = TensorAccess::tape(*t).lock();
    if (!s) continue;
    if (found && found != s) throw ContractError("operation mixes tensors from different tapes");
    found = std::move(s);
  }
  return found;
}

int live_node(const Tensor& t, const std::shared_ptr<TapeState>& state) {
  if (t.node_id() < 0) return -1;
  auto s = TensorAccess::tape(t).lock();
  return s == state ? t.node_id() : -1;
}

}  // namespace

void record(const char* name, std::span<const Tensor* const> inputs, Tensor& out, BackwardFn fn) {
  auto state = tape_of(inputs);
  if (!state) return;
  OpRecord op{name, {}, -1, std::move(fn)};
  op.inputs.reserve(inputs.size());
  for (const Tensor* t : inputs) op.inputs.push_back(t ? live_node(*t, state) : -1);
  op.output = state->new_node(out.shape());
  TensorAccess::tape(out) = state;
  TensorAccess::node(out) = op.output;
  state->ops.push_back(std::move(op));
}

void record(const char* name, std::initializer_list<const Tensor*> inputs, Tensor& out,
            BackwardFn fn) {
  record(name, std::span<const Tensor* const>(inputs.begin(), inputs.size()), out, std::move(fn));
}

}  // namespace detail

bool Tensor::tracked() const { return node_ >= 0 && !tape_.expired(); }

Tape::Tape(bool recording) : state_(std::make_shared<detail::TapeState>()) {
  state_->recording = recording;
}
Tape::~Tape() = default;
Tape::Tape(Tape&&) noexcept = default;
Tape& Tape::operator=(Tape&&) noexcept = default;

bool Tape::recording() const { return state_->recording; }

Tensor Tape::watch(const Tensor& x) {
  Tensor leaf = x.detach();
  if (!state_->recording) return leaf;
  TensorAccess::tape(leaf) = state_;
  TensorAccess::node(leaf) = state_->new_node(x.shape());
  return leaf;
}

Tensor Tape::bind(const Parameter& p) {
  if (!state_->recording) return p.value.detach();
  auto it = state_->bound.find(&p);
  if (it != state_->bound.end()) return it->second;
  Tensor leaf = watch(p.value);
  state_->bound.emplace(&p, leaf);
  return leaf;
}

std::size_t Tape::op_count() const { return state_->ops.size(); }

std::vector<std::string> Tape::op_names() const {
  std::vector<std::string> names;
  names.reserve(state_->ops.size());
  for (const auto& op : state_->ops) names.emplace_back(op.name);
  return names;
}

std::size_t Tape::count_ops(std::string_view name) const {
  std::size_t n = 0;
  for (const auto& op : state_->ops) n += (name == op.name) ? 1 : 0;
  return n;
}

Tensor use(Tape* tape, const Parameter& p) { return tape ? tape->bind(p) : p.value.detach(); }

Gradients backward(const Tensor& root) {
  if (!root.defined() || root.numel() != 1) {
    throw ContractError("backward() requires a scalar root");
  }
  auto state = TensorAccess::tape(root).lock();
  if (!state || root.node_id() < 0) throw ContractError("backward() root is not on a live tape");

  Gradients out;
  out.state_ = state;
  out.grads_.resize(state->node_shapes.size());
  out.grads_[root.node_id()] = Tensor::constant(root.shape(), 1.0, root.dtype());

  std::vector<bool> owned(state->node_shapes.size(), false);
  std::vector<char> needs_storage;
  for (auto it = state->ops.rbegin(); it != state->ops.rend(); ++it) {
    const auto& op = *it;
    if (op.output > root.node_id()) continue;
    const Tensor& g = out.grads_[op.output];
    if (!g.defined()) continue;

    needs_storage.assign(op.inputs.size(), 0);
    for (std::size_t i = 0; i < op.inputs.size(); ++i) needs_storage[i] = op.inputs[i] >= 0;
    std::span<const bool> needs(reinterpret_cast<const bool*>(needs_storage.data()),
                                needs_storage.size());
    detail::GradSink sink(needs);
    op.backward(g, sink);

    auto& results = sink.results();
    for (std::size_t i = 0; i < op.inputs.size(); ++i) {
      const int id = op.inputs[i];
      if (id < 0 || !results[i].defined()) continue;
      if (results[i].shape() != state->node_shapes[id]) {
        throw ContractError(std::string("gradient shape mismatch in backward of ") + op.name +
                            ": " + shape_str(results[i].shape()) + " vs " +
                            shape_str(state->node_shapes[id]));
      }
      auto& acc = out.grads_[id];
      if (!acc.defined()) {
        acc = results[i];
      } else if (owned[id]) {
        kernels::add_inplace(acc, results[i]);
      } else {
        acc = kernels::add(acc, results[i]);
        owned[id] = true;
      }
    }
    // Intermediate gradients are no longer needed once propagated.
    out.grads_[op.output] = Tensor();
  }
  return out;
}

Tensor Gradients::wrt(const Tensor& leaf) const {
  const int id = leaf.node_id();
  if (id >= 0 && TensorAccess::tape(leaf).lock() == state_ &&
      static_cast<std::size_t>(id) < grads_.size() && grads_[id].defined()) {
    return grads_[id];
  }
  return Tensor::zeros(leaf.shape(), leaf.dtype());
}

Tensor Gradients::wrt(const Parameter& p) const {
  auto it = state_->bound.find(&p);
  if (it == state_->bound.end()) return Tensor::zeros(p.value.shape(), p.value.dtype());
  return wrt(it->second);
}

bool Gradients::touched(const Parameter& p) const {
  auto it = state_->bound.find(&p);
  if (it == state_->bound.end()) return false;
  const int id = it->second.node_id();
  return grads_[id].defined();
}

}  // namespace bgg
