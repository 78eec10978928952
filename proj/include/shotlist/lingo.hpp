#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "shotlist/textdiff.hpp"

namespace shotlist::lingo {

enum class Pos { NOUN, VERB, ADJ, ADV, PRON, DET, ADP, NUM, PART, PROPN, PUNCT, SYM, X };

std::string_view to_string(Pos tag);
/// Throws std::invalid_argument for names outside the closed tag set.
Pos parse_pos(std::string_view name);

struct AnnotatedText {
  textdiff::TokenSeq tokens;
  std::vector<std::string> lemmas;
  std::vector<Pos> pos;

  std::size_t size() const { return tokens.size(); }
};

/// Failure of an external annotation or embedding service.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Annotator {
 public:
  virtual ~Annotator() = default;
  virtual AnnotatedText annotate(std::string_view text) const = 0;
};

/// Lowercase + suffix-stripping lemmas, lexicon POS with suffix rules.
class DefaultAnnotator final : public Annotator {
 public:
  AnnotatedText annotate(std::string_view text) const override;
};

/// Unit-norm sentence vector; all-zero for empty text.
using Embedding = Eigen::VectorXd;

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual Embedding embed(std::string_view text) const = 0;
  virtual Eigen::Index dimension() const = 0;
};

/// Hashed character 3/4/5-gram term frequencies, L2-normalized.
class HashedNgramEmbedder final : public Embedder {
 public:
  static constexpr Eigen::Index kDimension = 256;

  Embedding embed(std::string_view text) const override;
  Eigen::Index dimension() const override { return kDimension; }
};

struct HttpServiceConfig {
  std::string base_url;  // e.g. http://127.0.0.1:9000
  std::string path;      // e.g. /annotate
  std::chrono::milliseconds timeout{10000};
};

/// POSTs {"texts": [...]} and expects {"annotations": [{tokens, lemmas, pos}]}.
class HttpAnnotator final : public Annotator {
 public:
  explicit HttpAnnotator(HttpServiceConfig config) : config_(std::move(config)) {}
  AnnotatedText annotate(std::string_view text) const override;

 private:
  HttpServiceConfig config_;
};

/// POSTs {"texts": [...]} and expects {"vectors": [[...]]}; vectors are
/// re-normalized on receipt.
class HttpEmbedder final : public Embedder {
 public:
  HttpEmbedder(HttpServiceConfig config, Eigen::Index dimension)
      : config_(std::move(config)), dimension_(dimension) {}
  Embedding embed(std::string_view text) const override;
  Eigen::Index dimension() const override { return dimension_; }

 private:
  HttpServiceConfig config_;
  Eigen::Index dimension_;
};

/// Builds an annotation from externally supplied token texts, locating each
/// token in `text` left to right. Throws BackendError when tokens do not
/// line up with the text or list lengths differ.
AnnotatedText assemble_annotation(std::string_view text, const std::vector<std::string>& tokens,
                                  const std::vector<std::string>& lemmas,
                                  const std::vector<std::string>& pos);

/// 1 - a.b for unit vectors, clamped to [0, 2]. A zero vector on either side
/// gives the neutral distance 1.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_distance(const Eigen::MatrixBase<DerivedA>& a,
                                          const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size()) throw std::invalid_argument("cosine_distance: dimension mismatch");
  if (a.isZero(0) || b.isZero(0)) return Scalar(1);
  const Scalar d = Scalar(1) - a.dot(b);
  return std::clamp(d, Scalar(0), Scalar(2));
}

}  // namespace shotlist::lingo
