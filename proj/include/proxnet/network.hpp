#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace proxnet {

// Undirected pair with canonical orientation 0 <= i < j < n.
struct EdgeIndex {
  int i;
  int j;
  friend bool operator==(const EdgeIndex&, const EdgeIndex&) = default;
};

// Linear slot of pair (i,j), i<j, in row-major upper-triangle order.
inline std::size_t edge_offset(int n, int i, int j) {
  return static_cast<std::size_t>(i) * n - static_cast<std::size_t>(i) * (i + 1) / 2 +
         (j - i - 1);
}

std::size_t num_edge_slots(int n);
EdgeIndex edge_at(int n, std::size_t e);  // inverse of edge_offset

// N-node undirected simple graph stored as n(n-1)/2 upper-triangle bits.
// Symmetry and a zero diagonal hold by construction: (i,j) and (j,i) share
// one bit and self-pairs are unindexable.
class SymmetricBinaryNetwork {
 public:
  explicit SymmetricBinaryNetwork(int n);

  int n() const { return n_; }
  std::size_t edge_slots() const { return bits_.size(); }

  bool get(int i, int j) const;     // any order, i != j
  void set(int i, int j, bool v);   // any order, i != j
  std::uint8_t bit(std::size_t e) const { return bits_[e]; }
  void set_bit(std::size_t e, bool v) { bits_[e] = v ? 1 : 0; }

  std::size_t edge_count() const;
  std::vector<EdgeIndex> edges() const;  // ascending linear order

  friend bool operator==(const SymmetricBinaryNetwork&,
                         const SymmetricBinaryNetwork&) = default;

 private:
  int n_;
  std::vector<std::uint8_t> bits_;
};

std::vector<int> degrees(const SymmetricBinaryNetwork& A);

// Flips exactly the entries in I. Duplicate indices are rejected: a
// multi-flip touching one slot twice is ill-defined as a set operation.
SymmetricBinaryNetwork flip_entries(const SymmetricBinaryNetwork& A,
                                    const std::vector<EdgeIndex>& I);

// phi1_i = sum_j w_j Z_j A_ij
std::vector<double> exposure_weighted(const SymmetricBinaryNetwork& A,
                                      const std::vector<std::uint8_t>& Z,
                                      const std::vector<double>& w);

// phi1_i = d_i^{-1} sum_{j in N_i} Z_j, 0 for isolated units
std::vector<double> exposure_fraction(const SymmetricBinaryNetwork& A,
                                      const std::vector<std::uint8_t>& Z);

// Edge-list text: one "i j" line per set edge, 0-based, i<j, ascending
// linear order. Round trip is byte-stable.
std::string to_edge_list_text(const SymmetricBinaryNetwork& A);
SymmetricBinaryNetwork from_edge_list_text(int n, const std::string& text);

}  // namespace proxnet
