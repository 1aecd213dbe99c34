#include <cmath>

#include "doctest.h"

#include "cts/common/error.hpp"
#include "cts/graph/synth.hpp"
#include "cts/text/encoder.hpp"

using namespace cts;
using namespace cts::text;

TEST_CASE("built-in encoder") {
  const HashedNgramEncoder enc(256);
  CHECK(enc.encode("").isZero());
  CHECK(enc.encode("hello world") == enc.encode("hello world"));
  for (const char* s : {"a", "hello", "two words", "Reisekosten Erstattung"})
    CHECK(std::abs(enc.encode(s).norm() - 1.0f) < 1e-6f);
  CHECK(enc.encode("Hello") == enc.encode("hello"));
}

TEST_CASE("paraphrases are closer than unrelated texts") {
  const HashedNgramEncoder enc(256);
  const auto [tree, corpus] = graph::synthesize_tree({.node_count = 40, .paraphrases_per_answer = 4}, 21);
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<std::string> protos;
  for (const auto& n : tree.nodes())
    for (const auto& e : n.answers) {
      if (e.text.empty() || n.kind == graph::NodeKind::Variable) continue;
      protos.push_back(e.text);
      for (const auto& p : corpus.answer_texts(e, graph::CorpusSplit::All)) pairs.emplace_back(e.text, p);
    }
  REQUIRE(pairs.size() >= 100);
  int wins = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    const auto& [proto, para] = pairs[i];
    const auto& unrelated = protos[(i * 7 + 3) % protos.size()] == proto ? protos[(i * 7 + 4) % protos.size()]
                                                                          : protos[(i * 7 + 3) % protos.size()];
    if (cosine(enc.encode(proto), enc.encode(para)) > cosine(enc.encode(proto), enc.encode(unrelated))) ++wins;
  }
  CHECK(wins == 100);
}

TEST_CASE("cosine") {
  Embedding u(3), e1 = Embedding::Zero(3), e2 = Embedding::Zero(3);
  u << 1, 2, 3;
  e1[0] = 1;
  e2[1] = 1;
  CHECK(cosine(u, u) == doctest::Approx(1.0));
  CHECK(cosine(u, -u) == doctest::Approx(-1.0));
  CHECK(cosine(e1, e2) == 0.0);
  CHECK(cosine(u, Embedding::Zero(3)) == 0.0);
  CHECK_THROWS_AS(cosine(u, Embedding::Zero(4)), DimensionMismatch);
}

TEST_CASE("noise") {
  Rng rng(1);
  Embedding u(4);
  u << 1.0f, -0.5f, 0.0f, 0.25f;
  CHECK(add_noise(u, 0.0, rng) == u);
  CHECK(add_noise(Embedding::Zero(5), 0.7, rng).isZero());

  Rng a(9), b(9);
  CHECK(add_noise(u, 0.3, a) == add_noise(u, 0.3, b));

  // Monte-Carlo estimate of the per-coordinate standard deviation.
  const int draws = 100000;
  const double n = 0.1;
  std::vector<double> sum(4, 0.0), sq(4, 0.0);
  for (int i = 0; i < draws; ++i) {
    const auto x = add_noise(u, n, rng);
    for (int k = 0; k < 4; ++k) {
      sum[k] += x[k];
      sq[k] += static_cast<double>(x[k]) * x[k];
    }
  }
  for (int k = 0; k < 4; ++k) {
    const double mean = sum[k] / draws;
    const double sd = std::sqrt(std::max(0.0, sq[k] / draws - mean * mean));
    const double expected = n * std::abs(u[k]);
    if (expected == 0) CHECK(sd == 0.0);
    else CHECK(std::abs(sd - expected) / expected < 0.05);
  }
}

TEST_CASE("file encoder round trip") {
  const auto enc = std::make_shared<HashedNgramEncoder>(32);
  const std::string path = "test_text_embeddings.tsv";
  write_embeddings(path, {"alpha", "beta gamma"}, *enc);
  const auto strict = FileEncoder::load(path);
  CHECK(strict.dim() == 32);
  CHECK(strict.size() == 2);
  CHECK((strict.encode("alpha") - enc->encode("alpha")).norm() < 1e-6f);
  CHECK_THROWS_AS(strict.encode("delta"), LookupMiss);
  const auto lenient = FileEncoder::load(path, enc);
  CHECK(lenient.encode("delta") == enc->encode("delta"));
  CHECK_THROWS_AS(FileEncoder::load(path, std::make_shared<HashedNgramEncoder>(16)), DimensionMismatch);
}
