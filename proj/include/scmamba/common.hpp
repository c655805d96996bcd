#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace scmamba {

using NodeId = std::int32_t;
using CellId = std::int32_t;

/// A cell is a strictly increasing tuple of node indices; rank = size - 1.
using Cell = std::vector<NodeId>;

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using MatF = Mat<float>;
using MatD = Mat<double>;

enum class ErrorKind {
    invalid_argument,
    out_of_range,
    shape_mismatch,
    numeric,
    io,
    format,   // malformed file contents
    version,  // unsupported checkpoint version
    config,   // bad or unknown configuration key
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& msg) {
    throw Error(kind, msg);
}

/// Named view into one contiguous parameter (or gradient) tensor.
template <class T>
struct ParamView {
    std::string name;
    T* data = nullptr;
    std::ptrdiff_t size = 0;
};

struct CellHash {
    std::size_t operator()(const Cell& c) const noexcept {
        std::size_t h = 1469598103934665603ull;
        for (NodeId v : c) {
            h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        }
        return h;
    }
};

}  // namespace scmamba
