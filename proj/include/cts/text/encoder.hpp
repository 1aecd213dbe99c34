#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "cts/common/rng.hpp"

namespace cts::text {

using Embedding = Eigen::VectorXf;

/// Maps text to a fixed-dimension vector. Implementations are immutable
/// after construction and safe to call concurrently.
class Encoder {
 public:
  virtual ~Encoder() = default;
  virtual int dim() const = 0;
  virtual Embedding encode(const std::string& text) const = 0;
};

/// Signed hashed bag of character n-grams over the lowercased text padded
/// with one space on each side, L2-normalized.
class HashedNgramEncoder final : public Encoder {
 public:
  explicit HashedNgramEncoder(int dim = 256, int n = 3);

  int dim() const override { return dim_; }
  Embedding encode(const std::string& text) const override;

 private:
  int dim_;
  int n_;
};

/// Exact-text lookup table loaded from an embeddings file. Each line is
/// `<hex fnv1a64 of the text><TAB><d space-separated floats>`.
class FileEncoder final : public Encoder {
 public:
  /// Throws ParseError on malformed lines or inconsistent dimensions, and
  /// DimensionMismatch if `fallback` has a different dimension.
  static FileEncoder load(const std::string& path, std::shared_ptr<const Encoder> fallback = nullptr);

  int dim() const override { return dim_; }
  /// Throws LookupMiss when the text is absent and no fallback is set.
  Embedding encode(const std::string& text) const override;
  std::size_t size() const { return table_.size(); }

 private:
  FileEncoder() = default;

  int dim_ = 0;
  std::unordered_map<std::uint64_t, Embedding> table_;
  std::shared_ptr<const Encoder> fallback_;
};

/// Writes `texts` encoded by `encoder` in the FileEncoder format.
void write_embeddings(const std::string& path, const std::vector<std::string>& texts, const Encoder& encoder);

/// Memoizes a fixed set of texts; other texts go to the wrapped encoder.
class EncodingTable final : public Encoder {
 public:
  EncodingTable(std::shared_ptr<const Encoder> inner, const std::vector<std::string>& texts);

  int dim() const override { return inner_->dim(); }
  Embedding encode(const std::string& text) const override;
  /// Reference to a memoized encoding, or nullptr.
  const Embedding* find(const std::string& text) const;

 private:
  std::shared_ptr<const Encoder> inner_;
  std::unordered_map<std::string, Embedding> table_;
};

/// Cosine similarity; 0 if either vector is zero. Throws DimensionMismatch.
double cosine(const Embedding& a, const Embedding& b);

/// Gaussian input noise. Element-wise, coordinate i gets sd n*|u_i|; with
/// `isotropic` every coordinate gets sd n*||u||.
Embedding add_noise(const Embedding& u, double n, Rng& rng, bool isotropic = false);

}  // namespace cts::text
