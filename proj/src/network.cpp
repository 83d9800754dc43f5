#include "proxnet/network.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace proxnet {

std::size_t num_edge_slots(int n) {
  return static_cast<std::size_t>(n) * (n - 1) / 2;
}

EdgeIndex edge_at(int n, std::size_t e) {
  if (e >= num_edge_slots(n)) throw std::out_of_range("edge_at: slot out of range");
  // Walk rows; row i holds n-1-i slots. n is small enough everywhere this
  // is used off the hot path.
  std::size_t row_start = 0;
  for (int i = 0; i < n - 1; ++i) {
    std::size_t row_len = static_cast<std::size_t>(n - 1 - i);
    if (e < row_start + row_len)
      return EdgeIndex{i, static_cast<int>(i + 1 + (e - row_start))};
    row_start += row_len;
  }
  throw std::out_of_range("edge_at: unreachable");
}

SymmetricBinaryNetwork::SymmetricBinaryNetwork(int n)
    : n_(n), bits_(num_edge_slots(n), 0) {
  if (n < 2) throw std::invalid_argument("network needs n >= 2");
}

bool SymmetricBinaryNetwork::get(int i, int j) const {
  if (i == j) return false;
  if (i > j) std::swap(i, j);
  return bits_[edge_offset(n_, i, j)] != 0;
}

void SymmetricBinaryNetwork::set(int i, int j, bool v) {
  if (i == j) throw std::invalid_argument("self-loops are unrepresentable");
  if (i > j) std::swap(i, j);
  bits_[edge_offset(n_, i, j)] = v ? 1 : 0;
}

std::size_t SymmetricBinaryNetwork::edge_count() const {
  return std::accumulate(bits_.begin(), bits_.end(), std::size_t{0});
}

std::vector<EdgeIndex> SymmetricBinaryNetwork::edges() const {
  std::vector<EdgeIndex> out;
  std::size_t e = 0;
  for (int i = 0; i < n_ - 1; ++i)
    for (int j = i + 1; j < n_; ++j, ++e)
      if (bits_[e]) out.push_back(EdgeIndex{i, j});
  return out;
}

std::vector<int> degrees(const SymmetricBinaryNetwork& A) {
  std::vector<int> d(A.n(), 0);
  std::size_t e = 0;
  for (int i = 0; i < A.n() - 1; ++i)
    for (int j = i + 1; j < A.n(); ++j, ++e)
      if (A.bit(e)) {
        ++d[i];
        ++d[j];
      }
  return d;
}

SymmetricBinaryNetwork flip_entries(const SymmetricBinaryNetwork& A,
                                    const std::vector<EdgeIndex>& I) {
  SymmetricBinaryNetwork out = A;
  std::vector<std::size_t> seen;
  seen.reserve(I.size());
  for (const EdgeIndex& e : I) {
    if (!(0 <= e.i && e.i < e.j && e.j < A.n()))
      throw std::invalid_argument("flip_entries: invalid edge index");
    std::size_t off = edge_offset(A.n(), e.i, e.j);
    if (std::find(seen.begin(), seen.end(), off) != seen.end())
      throw std::invalid_argument("flip_entries: duplicate edge index");
    seen.push_back(off);
    out.set_bit(off, !out.bit(off));
  }
  return out;
}

std::vector<double> exposure_weighted(const SymmetricBinaryNetwork& A,
                                      const std::vector<std::uint8_t>& Z,
                                      const std::vector<double>& w) {
  const int n = A.n();
  if (static_cast<int>(Z.size()) != n || static_cast<int>(w.size()) != n)
    throw std::invalid_argument("exposure_weighted: length mismatch");
  std::vector<double> phi(n, 0.0);
  std::size_t e = 0;
  for (int i = 0; i < n - 1; ++i)
    for (int j = i + 1; j < n; ++j, ++e)
      if (A.bit(e)) {
        phi[i] += w[j] * Z[j];
        phi[j] += w[i] * Z[i];
      }
  return phi;
}

std::vector<double> exposure_fraction(const SymmetricBinaryNetwork& A,
                                      const std::vector<std::uint8_t>& Z) {
  const int n = A.n();
  if (static_cast<int>(Z.size()) != n)
    throw std::invalid_argument("exposure_fraction: length mismatch");
  std::vector<double> num(n, 0.0);
  std::vector<int> d(n, 0);
  std::size_t e = 0;
  for (int i = 0; i < n - 1; ++i)
    for (int j = i + 1; j < n; ++j, ++e)
      if (A.bit(e)) {
        num[i] += Z[j];
        num[j] += Z[i];
        ++d[i];
        ++d[j];
      }
  std::vector<double> phi(n, 0.0);
  for (int i = 0; i < n; ++i)
    if (d[i] > 0) phi[i] = num[i] / d[i];
  return phi;
}

std::string to_edge_list_text(const SymmetricBinaryNetwork& A) {
  std::ostringstream os;
  std::size_t e = 0;
  for (int i = 0; i < A.n() - 1; ++i)
    for (int j = i + 1; j < A.n(); ++j, ++e)
      if (A.bit(e)) os << i << ' ' << j << '\n';
  return os.str();
}

SymmetricBinaryNetwork from_edge_list_text(int n, const std::string& text) {
  SymmetricBinaryNetwork A(n);
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    int i, j;
    std::string extra;
    if (!(ls >> i >> j) || (ls >> extra))
      throw std::runtime_error("edge list: malformed line " + std::to_string(lineno));
    if (!(0 <= i && i < j && j < n))
      throw std::runtime_error("edge list: bad pair at line " + std::to_string(lineno));
    A.set(i, j, true);
  }
  return A;
}

}  // namespace proxnet
