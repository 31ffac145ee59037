#include "tvr/core/params.hpp"

#include "tvr/core/error.hpp"

namespace tvr {

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

Parameter& ParamStore::add(std::string name, Matrix init, bool trainable, bool decay) {
  if (index_.count(name) != 0) throw InvalidArgument("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->grad = Matrix::Zero(init.rows(), init.cols());
  p->value = std::move(init);
  p->trainable = trainable;
  p->decay = decay;
  Parameter& ref = *p;
  index_.emplace(ref.name, &ref);
  params_.push_back(std::move(p));
  return ref;
}

Parameter& ParamStore::at(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("unknown parameter: " + std::string(name));
  return *it->second;
}

const Parameter& ParamStore::at(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("unknown parameter: " + std::string(name));
  return *it->second;
}

bool ParamStore::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

std::vector<Parameter*> ParamStore::trainable() {
  std::vector<Parameter*> out;
  for (auto& p : params_)
    if (p->trainable) out.push_back(p.get());
  return out;
}

std::vector<Parameter*> ParamStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParamStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParamStore::scalar_count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (!trainable_only || p->trainable) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p->grad.setZero(p->value.rows(), p->value.cols());
}

void ParamStore::copy_values_from(const ParamStore& other) {
  if (other.size() != size()) throw InvalidArgument("parameter count mismatch");
  for (const auto& src : other.params_) {
    Parameter& dst = at(src->name);
    if (dst.value.rows() != src->value.rows() || dst.value.cols() != src->value.cols())
      throw InvalidArgument("parameter shape mismatch: " + src->name);
    dst.value = src->value;
  }
}

std::uint64_t ParamStore::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params_) {
    h = fnv1a(p->name.data(), p->name.size(), h);
    const std::int64_t shape[2] = {p->value.rows(), p->value.cols()};
    h = fnv1a(shape, sizeof(shape), h);
    h = fnv1a(p->value.data(), sizeof(double) * static_cast<std::size_t>(p->value.size()), h);
  }
  return h;
}

}  // namespace tvr
