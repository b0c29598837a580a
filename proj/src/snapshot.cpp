#include "mcmps/snapshot.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "mcmps/errors.hpp"

namespace mcmps {

namespace {

constexpr std::array<char, 8> kMpsMagic{'M', 'C', 'M', 'P', 'S', 'N', 'A', 'P'};
constexpr std::array<char, 8> kRhoMagic{'M', 'C', 'R', 'H', 'O', 'S', 'N', 'P'};

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated snapshot");
  return v;
}

void expect_magic(std::istream& in, const std::array<char, 8>& magic) {
  std::array<char, 8> buf{};
  in.read(buf.data(), buf.size());
  if (!in || buf != magic) throw std::runtime_error("not a snapshot file (bad magic)");
}

}  // namespace

void write_snapshot(std::ostream& out, const MpsState& state) {
  out.write(kMpsMagic.data(), kMpsMagic.size());
  put<std::uint32_t>(out, kSnapshotVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(state.length()));
  put<std::int32_t>(out, state.left_ok());
  put<std::int32_t>(out, state.right_ok());
  put<double>(out, state.truncation_log().cumulative);
  put<std::int64_t>(out, state.truncation_log().sweeps);
  for (int i = 0; i < state.length(); ++i) {
    const auto& t = state.tensor(i);
    const auto dl = static_cast<std::uint32_t>(t[0].rows());
    const auto dr = static_cast<std::uint32_t>(t[0].cols());
    put(out, dl);
    put(out, dr);
    for (std::uint32_t a = 0; a < dl; ++a)
      for (int s = 0; s < 2; ++s)
        for (std::uint32_t b = 0; b < dr; ++b) {
          put<double>(out, t[s](a, b).real());
          put<double>(out, t[s](a, b).imag());
        }
  }
  if (!out) throw std::runtime_error("failed writing MPS snapshot");
}

MpsState read_snapshot(std::istream& in) {
  expect_magic(in, kMpsMagic);
  const auto version = get<std::uint32_t>(in);
  if (version != kSnapshotVersion) throw std::runtime_error("unsupported snapshot version " + std::to_string(version));
  const auto L = get<std::uint32_t>(in);
  const auto left_ok = get<std::int32_t>(in);
  const auto right_ok = get<std::int32_t>(in);
  const auto cumulative = get<double>(in);
  const auto sweeps = get<std::int64_t>(in);
  std::vector<MpsState::SiteTensor> tensors(L);
  for (std::uint32_t i = 0; i < L; ++i) {
    const auto dl = get<std::uint32_t>(in);
    const auto dr = get<std::uint32_t>(in);
    tensors[i][0].resize(dl, dr);
    tensors[i][1].resize(dl, dr);
    for (std::uint32_t a = 0; a < dl; ++a)
      for (int s = 0; s < 2; ++s)
        for (std::uint32_t b = 0; b < dr; ++b) {
          const double re = get<double>(in);
          const double im = get<double>(in);
          tensors[i][s](a, b) = cplx(re, im);
        }
  }
  MpsState st = MpsState::from_parts(std::move(tensors), left_ok, right_ok);
  st.truncation_log().cumulative = cumulative;
  st.truncation_log().sweeps = sweeps;
  return st;
}

void save_snapshot(const std::filesystem::path& path, const MpsState& state) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_snapshot(out, state);
}

MpsState load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open snapshot " + path.string());
  return read_snapshot(in);
}

void save_density_matrix(const std::filesystem::path& path, const Eigen::MatrixXcd& rho) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(kRhoMagic.data(), kRhoMagic.size());
  put<std::uint32_t>(out, 1);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(rho.rows()));
  for (Eigen::Index a = 0; a < rho.rows(); ++a)
    for (Eigen::Index b = 0; b < rho.cols(); ++b) {
      put<double>(out, rho(a, b).real());
      put<double>(out, rho(a, b).imag());
    }
}

Eigen::MatrixXcd load_density_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open density matrix " + path.string());
  expect_magic(in, kRhoMagic);
  if (get<std::uint32_t>(in) != 1) throw std::runtime_error("unsupported density-matrix snapshot version");
  const auto dim = static_cast<Eigen::Index>(get<std::uint64_t>(in));
  Eigen::MatrixXcd rho(dim, dim);
  for (Eigen::Index a = 0; a < dim; ++a)
    for (Eigen::Index b = 0; b < dim; ++b) {
      const double re = get<double>(in);
      const double im = get<double>(in);
      rho(a, b) = cplx(re, im);
    }
  return rho;
}

}  // namespace mcmps
