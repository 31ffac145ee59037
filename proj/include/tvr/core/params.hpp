#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "tvr/core/tensor.hpp"

namespace tvr {

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;  // same shape as value once zero_grad() or backward has touched it
  bool trainable = true;
  bool decay = true;  // participates in decoupled weight decay
};

// Owns every parameter of a model. Addresses are stable for the lifetime of
// the store, so modules keep raw Parameter pointers into it.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;
  ParamStore(ParamStore&&) = default;
  ParamStore& operator=(ParamStore&&) = default;

  Parameter& add(std::string name, Matrix init, bool trainable = true, bool decay = true);

  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::vector<Parameter*> trainable();
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count(bool trainable_only = true) const;

  void zero_grad();
  void copy_values_from(const ParamStore& other);  // names and shapes must match

  // FNV-1a over names, shapes and value bytes in registration order.
  std::uint64_t hash() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, Parameter*, std::less<>> index_;
};

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace tvr
