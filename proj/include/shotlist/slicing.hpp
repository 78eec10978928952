#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <compare>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "shotlist/core.hpp"
#include "shotlist/lingo.hpp"
#include "shotlist/llmfn.hpp"
#include "shotlist/templates.hpp"
#include "shotlist/textdiff.hpp"

namespace shotlist::slicing {

inline constexpr std::size_t kDefaultClusterCount = 20;
inline constexpr std::size_t kMinSliceSize = 10;
inline constexpr std::size_t kDefaultBatchSize = 5;
inline constexpr const char* kOutlierSliceId = "outlier";

struct Slice {
  std::string id;
  std::vector<std::string> member_ids;  // in pool order
  std::string key;                      // medoid's key phrase
  bool is_outlier = false;

  bool operator==(const Slice&) const = default;
};

struct SliceStats {
  std::size_t n = 0;  // members
  std::size_t m = 0;  // members with a correctness verdict
  std::size_t k = 0;  // of those, correct

  bool operator==(const SliceStats&) const = default;
};

/// Slice priority. Never-sampled slices form a tier above every sampled
/// slice and are ordered among themselves by ln n.
struct SliceReward {
  bool unexplored = false;
  double value = 0.0;  // mu for sampled slices, ln n for unexplored ones

  std::partial_ordering operator<=>(const SliceReward& o) const {
    if (unexplored != o.unexplored) return unexplored <=> o.unexplored;
    return value <=> o.value;
  }
  bool operator==(const SliceReward&) const = default;
};

/// mu = (1 - k/m) ln n + sqrt(ln i / m); the unexplored tier when m == 0.
SliceReward reward(const SliceStats& stats, int iteration);

/// Memoizes annotations and embeddings by text.
class TextCache {
 public:
  TextCache(const lingo::Annotator& annotator, const lingo::Embedder& embedder)
      : annotator_(annotator), embedder_(embedder) {}

  const lingo::AnnotatedText& annotation(const std::string& text);
  const lingo::Embedding& embedding(const std::string& text);
  const lingo::Embedder& embedder() const { return embedder_; }

 private:
  const lingo::Annotator& annotator_;
  const lingo::Embedder& embedder_;
  std::unordered_map<std::string, lingo::AnnotatedText> annotations_;
  std::unordered_map<std::string, lingo::Embedding> embeddings_;
};

/// Key phrases of demonstrations, generalized and reduced to a
/// representative template set.
std::vector<templates::Template> induce_templates(const core::DemonstrationSet& demos,
                                                  TextCache& cache);

struct PoolPhrases {
  std::vector<std::string> ids;
  std::vector<std::vector<textdiff::KeyPhrase>> phrases;  // aligned with ids

  std::size_t size() const { return ids.size(); }
};

/// Every template match span becomes a key phrase; inputs nothing matches
/// fall back to the full sentence.
PoolPhrases assign_key_phrases(const std::vector<core::Example>& pool,
                               const std::vector<templates::Template>& selected,
                               TextCache& cache);

/// Example distance: minimum cosine distance over key-phrase pairs.
Eigen::MatrixXd example_distances(const PoolPhrases& phrases, TextCache& cache);

/// Average-linkage agglomerative clustering of a symmetric distance matrix
/// cut at `clusters` groups. Returns a cluster label per point; labels are
/// numbered by each cluster's smallest member index.
std::vector<std::size_t> agglomerate(const Eigen::MatrixXd& distances, std::size_t clusters);

/// Clusters at K = min(clusters, pool size), then folds every cluster with
/// fewer than `min_size` members into a single outlier slice.
std::vector<Slice> cluster(const PoolPhrases& phrases, TextCache& cache,
                           std::size_t clusters = kDefaultClusterCount,
                           std::size_t min_size = kMinSliceSize);

/// example id -> implied correctness.
using Verdicts = std::map<std::string, bool>;

/// Leave-one-out verdict for every demonstration (needs >= 2 demos).
Verdicts demo_verdicts(const core::DemonstrationSet& demos, const llmfn::Backend& backend,
                       const llmfn::RetryPolicy& retry = {});

/// Status-implied verdicts of pool members, with demonstration verdicts
/// taken from `demos` instead.
Verdicts collect_verdicts(const core::SessionState& state, const Verdicts& demos);

SliceStats slice_stats(const Slice& slice, const Verdicts& verdicts);

struct Candidate {
  std::string example_id;
  std::string slice_id;

  bool operator==(const Candidate&) const = default;
};

class EmptyPool : public std::runtime_error {
 public:
  EmptyPool() : std::runtime_error("no unsurfaced examples left in the pool") {}
};

/// Indices of `rewards` from highest to lowest; equal rewards keep slice order.
std::vector<std::size_t> rank_slices(const std::vector<SliceReward>& rewards);

/// Walks the ranked slices round-robin, drawing one uniformly random
/// eligible member per slice per pass.
class SliceCursor {
 public:
  SliceCursor(const std::vector<Slice>& slices, const std::vector<SliceReward>& rewards,
              const core::SessionState& state);

  std::optional<Candidate> next(core::Rng& rng);
  bool exhausted() const;

 private:
  struct Lane {
    std::string slice_id;
    std::vector<std::string> remaining;
  };
  std::vector<Lane> lanes_;  // in rank order
  std::size_t position_ = 0;
};

/// First `batch_size` draws of a SliceCursor. Throws EmptyPool when nothing
/// is eligible.
std::vector<Candidate> sample_batch(const std::vector<Slice>& slices,
                                    const std::vector<SliceReward>& rewards,
                                    const core::SessionState& state, core::Rng& rng,
                                    std::size_t batch_size = kDefaultBatchSize);

/// True while an example can still be drawn.
bool is_eligible(const core::Example& e);

/// Everything computed for one iteration's slicing pass.
struct SliceModel {
  std::vector<templates::Template> templates;
  PoolPhrases phrases;
  std::vector<Slice> slices;
  std::vector<SliceStats> stats;
  std::vector<SliceReward> rewards;
};

SliceModel build_slice_model(const core::SessionState& state, const Verdicts& verdicts,
                             TextCache& cache, std::size_t clusters = kDefaultClusterCount,
                             std::size_t min_size = kMinSliceSize);

}  // namespace shotlist::slicing
