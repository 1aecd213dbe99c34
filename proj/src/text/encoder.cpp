#include "cts/text/encoder.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cts/common/error.hpp"
#include "cts/common/hash.hpp"

namespace cts::text {

HashedNgramEncoder::HashedNgramEncoder(int dim, int n) : dim_(dim), n_(n) {
  if (dim < 1) throw InvalidParams("encoder dimension must be positive");
  if (n < 1) throw InvalidParams("n-gram length must be positive");
}

Embedding HashedNgramEncoder::encode(const std::string& text) const {
  Embedding v = Embedding::Zero(dim_);
  if (text.empty()) return v;
  std::string padded = " ";
  for (unsigned char c : text) padded.push_back(static_cast<char>(std::tolower(c)));
  padded.push_back(' ');

  const auto n = static_cast<std::size_t>(n_);
  const std::size_t grams = padded.size() >= n ? padded.size() - n + 1 : 1;
  std::uint64_t first = 0;
  for (std::size_t i = 0; i < grams; ++i) {
    const std::uint64_t h = fnv1a64(std::string_view(padded).substr(i, n));
    if (i == 0) first = h;
    const auto bucket = static_cast<Eigen::Index>((h >> 1) % static_cast<std::uint64_t>(dim_));
    v[bucket] += (h & 1U) ? 1.0f : -1.0f;
  }
  const float norm = v.norm();
  if (norm == 0.0f) {
    // Signed collisions cancelled everything; keep the text distinguishable.
    v[static_cast<Eigen::Index>((first >> 1) % static_cast<std::uint64_t>(dim_))] = 1.0f;
    return v;
  }
  return v / norm;
}

FileEncoder FileEncoder::load(const std::string& path, std::shared_ptr<const Encoder> fallback) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open embeddings file '" + path + "'");
  FileEncoder enc;
  enc.fallback_ = std::move(fallback);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab != 16) throw ParseError(path + ":" + std::to_string(line_no) + ": expected 16 hex digits and a tab");
    std::uint64_t key = 0;
    const auto [p, ec] = std::from_chars(line.data(), line.data() + 16, key, 16);
    if (ec != std::errc() || p != line.data() + 16)
      throw ParseError(path + ":" + std::to_string(line_no) + ": bad key");
    std::vector<float> values;
    std::istringstream is(line.substr(17));
    for (std::string tok; is >> tok;) {
      float f = 0;
      const auto [q, e2] = std::from_chars(tok.data(), tok.data() + tok.size(), f);
      if (e2 != std::errc() || q != tok.data() + tok.size() || !std::isfinite(f))
        throw ParseError(path + ":" + std::to_string(line_no) + ": bad value '" + tok + "'");
      values.push_back(f);
    }
    if (values.empty()) throw ParseError(path + ":" + std::to_string(line_no) + ": no values");
    if (enc.dim_ == 0) enc.dim_ = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != enc.dim_)
      throw ParseError(path + ":" + std::to_string(line_no) + ": dimension " + std::to_string(values.size()) +
                       ", expected " + std::to_string(enc.dim_));
    enc.table_[key] = Eigen::Map<Embedding>(values.data(), enc.dim_);
  }
  if (enc.dim_ == 0) {
    if (!enc.fallback_) throw ParseError("embeddings file '" + path + "' is empty");
    enc.dim_ = enc.fallback_->dim();
  }
  if (enc.fallback_ && enc.fallback_->dim() != enc.dim_)
    throw DimensionMismatch("fallback encoder dimension differs from embeddings file");
  return enc;
}

Embedding FileEncoder::encode(const std::string& text) const {
  if (text.empty()) return Embedding::Zero(dim_);
  const auto it = table_.find(fnv1a64(text));
  if (it != table_.end()) return it->second;
  if (fallback_) return fallback_->encode(text);
  throw LookupMiss("no embedding for text '" + text + "'");
}

void write_embeddings(const std::string& path, const std::vector<std::string>& texts, const Encoder& encoder) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  char buf[64];
  for (const auto& t : texts) {
    if (t.empty()) continue;
    const auto v = encoder.encode(t);
    out << hex64(fnv1a64(t)) << '\t';
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v[i]);
      if (i) out << ' ';
      out.write(buf, p - buf);
    }
    out << '\n';
  }
}

EncodingTable::EncodingTable(std::shared_ptr<const Encoder> inner, const std::vector<std::string>& texts)
    : inner_(std::move(inner)) {
  for (const auto& t : texts)
    if (!table_.count(t)) table_.emplace(t, inner_->encode(t));
}

Embedding EncodingTable::encode(const std::string& text) const {
  if (const auto* e = find(text)) return *e;
  return inner_->encode(text);
}

const Embedding* EncodingTable::find(const std::string& text) const {
  const auto it = table_.find(text);
  return it == table_.end() ? nullptr : &it->second;
}

double cosine(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size())
    throw DimensionMismatch("cosine of vectors with dimensions " + std::to_string(a.size()) + " and " +
                            std::to_string(b.size()));
  const double na = a.cast<double>().norm();
  const double nb = b.cast<double>().norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  const double c = a.cast<double>().dot(b.cast<double>()) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

Embedding add_noise(const Embedding& u, double n, Rng& rng, bool isotropic) {
  if (n < 0) throw InvalidParams("noise level must be non-negative");
  if (n == 0.0) return u;
  Embedding out = u;
  const double global_sd = n * u.cast<double>().norm();
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double sd = isotropic ? global_sd : n * std::abs(static_cast<double>(u[i]));
    if (sd == 0.0) continue;
    out[i] = static_cast<float>(rng.normal(u[i], sd));
  }
  return out;
}

}  // namespace cts::text
