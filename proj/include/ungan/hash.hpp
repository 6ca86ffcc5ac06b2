#pragma once

#include "ungan/core.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace ungan {

// Lower-case hex SHA-256.
std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

template <typename Derived>
std::string sha256_hex(const Eigen::DenseBase<Derived>& m) {
  const auto dense = m.derived().eval();
  return sha256_hex(dense.data(), std::size_t(dense.size()) * sizeof(typename Derived::Scalar));
}

}  // namespace ungan
