#include "shotlist/slicing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace shotlist::slicing {
namespace {

struct Merge {
  std::size_t keep = 0;
  std::size_t gone = 0;
  double height = 0.0;
};

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a), b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

// Nearest-neighbor chain over a Lance-Williams average-linkage matrix.
std::vector<Merge> average_linkage(Eigen::MatrixXd w) {
  const auto n = static_cast<std::size_t>(w.rows());
  std::vector<std::size_t> size(n, 1);
  std::vector<bool> active(n, true);
  std::vector<std::size_t> chain;
  std::vector<Merge> merges;
  merges.reserve(n > 0 ? n - 1 : 0);

  std::size_t remaining = n;
  while (remaining > 1) {
    if (chain.empty()) {
      for (std::size_t i = 0; i < n; ++i)
        if (active[i]) {
          chain.push_back(i);
          break;
        }
    }
    const std::size_t a = chain.back();
    const auto ai = static_cast<Eigen::Index>(a);
    double best = std::numeric_limits<double>::infinity();
    std::size_t b = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (!active[j] || j == a) continue;
      const double d = w(ai, static_cast<Eigen::Index>(j));
      if (d < best) {
        best = d;
        b = j;
      }
    }
    if (chain.size() >= 2) {
      const std::size_t prev = chain[chain.size() - 2];
      if (w(ai, static_cast<Eigen::Index>(prev)) <= best) b = prev;
    }
    if (chain.size() >= 2 && b == chain[chain.size() - 2]) {
      chain.pop_back();
      chain.pop_back();
      const std::size_t keep = std::min(a, b), gone = std::max(a, b);
      const auto ki = static_cast<Eigen::Index>(keep), gi = static_cast<Eigen::Index>(gone);
      const double sk = static_cast<double>(size[keep]), sg = static_cast<double>(size[gone]);
      for (std::size_t k = 0; k < n; ++k) {
        if (!active[k] || k == keep || k == gone) continue;
        const auto kk = static_cast<Eigen::Index>(k);
        const double d = (sk * w(ki, kk) + sg * w(gi, kk)) / (sk + sg);
        w(ki, kk) = d;
        w(kk, ki) = d;
      }
      size[keep] += size[gone];
      active[gone] = false;
      --remaining;
      merges.push_back({keep, gone, best});
    } else {
      chain.push_back(b);
    }
  }
  return merges;
}

}  // namespace

SliceReward reward(const SliceStats& stats, int iteration) {
  if (iteration < 1) throw std::invalid_argument("iteration must be >= 1");
  const double ln_n = stats.n > 0 ? std::log(static_cast<double>(stats.n)) : 0.0;
  if (stats.m == 0) return {true, ln_n};
  const double m = static_cast<double>(stats.m);
  const double error_rate = 1.0 - static_cast<double>(stats.k) / m;
  const double rarity = std::sqrt(std::log(static_cast<double>(iteration)) / m);
  return {false, error_rate * ln_n + rarity};
}

const lingo::AnnotatedText& TextCache::annotation(const std::string& text) {
  auto it = annotations_.find(text);
  if (it == annotations_.end()) it = annotations_.emplace(text, annotator_.annotate(text)).first;
  return it->second;
}

const lingo::Embedding& TextCache::embedding(const std::string& text) {
  auto it = embeddings_.find(text);
  if (it == embeddings_.end()) it = embeddings_.emplace(text, embedder_.embed(text)).first;
  return it->second;
}

std::vector<templates::Template> induce_templates(const core::DemonstrationSet& demos,
                                                  TextCache& cache) {
  std::vector<templates::AnnotatedElement> elements;
  for (const auto& d : demos.demos) {
    const auto& ann = cache.annotation(d.input);
    for (auto& kp : textdiff::extract_key_phrases(d.input, d.output)) {
      if (kp.first >= kp.last) continue;
      templates::CoverageElement e{elements.size(), std::move(kp), d.example_id};
      elements.push_back({std::move(e), ann});
    }
  }
  if (elements.empty()) return {};
  const auto candidates = templates::induce(elements);
  std::vector<templates::CoverageElement> plain;
  plain.reserve(elements.size());
  for (const auto& e : elements) plain.push_back(e.element);
  return templates::select_representative(candidates, plain);
}

PoolPhrases assign_key_phrases(const std::vector<core::Example>& pool,
                               const std::vector<templates::Template>& selected,
                               TextCache& cache) {
  PoolPhrases out;
  out.ids.reserve(pool.size());
  out.phrases.reserve(pool.size());
  for (const auto& ex : pool) {
    const auto& ann = cache.annotation(ex.input);
    std::vector<textdiff::KeyPhrase> found;
    for (const auto& t : selected) {
      for (auto [first, last] : templates::match(t, ann)) {
        textdiff::KeyPhrase kp{ann.tokens.span_text(first, last), first, last,
                               textdiff::PhraseSource::Matched};
        if (std::find(found.begin(), found.end(), kp) == found.end()) found.push_back(std::move(kp));
      }
    }
    if (found.empty())
      found.push_back({ann.tokens.span_text(0, ann.size()), 0, ann.size(),
                       textdiff::PhraseSource::FullSentence});
    out.ids.push_back(ex.id);
    out.phrases.push_back(std::move(found));
  }
  return out;
}

Eigen::MatrixXd example_distances(const PoolPhrases& phrases, TextCache& cache) {
  // Unique phrase texts -> rows of an embedding matrix.
  std::unordered_map<std::string, Eigen::Index> row_of;
  std::vector<std::vector<Eigen::Index>> rows(phrases.size());
  std::vector<const lingo::Embedding*> vectors;
  for (std::size_t e = 0; e < phrases.size(); ++e) {
    for (const auto& kp : phrases.phrases[e]) {
      auto [it, inserted] = row_of.try_emplace(kp.text, static_cast<Eigen::Index>(vectors.size()));
      if (inserted) vectors.push_back(&cache.embedding(kp.text));
      rows[e].push_back(it->second);
    }
  }
  const auto dim = cache.embedder().dimension();
  const auto u = static_cast<Eigen::Index>(vectors.size());
  Eigen::MatrixXd emb(u, dim);
  Eigen::VectorXd is_zero(u);
  for (Eigen::Index r = 0; r < u; ++r) {
    emb.row(r) = vectors[static_cast<std::size_t>(r)]->transpose();
    is_zero[r] = emb.row(r).isZero(0) ? 1.0 : 0.0;
  }
  Eigen::MatrixXd phrase_dist = Eigen::MatrixXd::Ones(u, u) - emb * emb.transpose();
  phrase_dist = phrase_dist.cwiseMax(0.0).cwiseMin(2.0);
  for (Eigen::Index r = 0; r < u; ++r) {
    if (is_zero[r] != 0.0) {
      phrase_dist.row(r).setOnes();
      phrase_dist.col(r).setOnes();
    }
  }

  const auto n = static_cast<Eigen::Index>(phrases.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const auto& ra = rows[static_cast<std::size_t>(a)];
    for (Eigen::Index b = a + 1; b < n; ++b) {
      double best = std::numeric_limits<double>::infinity();
      for (auto pa : ra)
        for (auto pb : rows[static_cast<std::size_t>(b)]) best = std::min(best, phrase_dist(pa, pb));
      d(a, b) = best;
      d(b, a) = best;
    }
  }
  return d;
}

std::vector<std::size_t> agglomerate(const Eigen::MatrixXd& distances, std::size_t clusters) {
  const auto n = static_cast<std::size_t>(distances.rows());
  if (n == 0) return {};
  clusters = std::clamp<std::size_t>(clusters, 1, n);
  auto merges = average_linkage(distances);
  std::stable_sort(merges.begin(), merges.end(),
                   [](const Merge& a, const Merge& b) { return a.height < b.height; });
  DisjointSets sets(n);
  for (std::size_t i = 0; i < n - clusters; ++i) sets.unite(merges[i].keep, merges[i].gone);

  std::vector<std::size_t> label(n);
  std::unordered_map<std::size_t, std::size_t> label_of_root;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, _] = label_of_root.try_emplace(sets.find(i), label_of_root.size());
    label[i] = it->second;
  }
  return label;
}

std::vector<Slice> cluster(const PoolPhrases& phrases, TextCache& cache, std::size_t clusters,
                           std::size_t min_size) {
  const std::size_t n = phrases.size();
  if (n == 0) return {};
  const Eigen::MatrixXd d = example_distances(phrases, cache);
  const auto label = agglomerate(d, std::min(clusters, n));
  const std::size_t groups = label.empty() ? 0 : *std::max_element(label.begin(), label.end()) + 1;

  std::vector<std::vector<std::size_t>> members(groups);
  for (std::size_t i = 0; i < n; ++i) members[label[i]].push_back(i);

  auto medoid_key = [&](const std::vector<std::size_t>& idx) {
    std::size_t best = idx.front();
    double best_sum = std::numeric_limits<double>::infinity();
    for (auto i : idx) {
      double sum = 0;
      for (auto j : idx) sum += d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (sum < best_sum) {
        best_sum = sum;
        best = i;
      }
    }
    return phrases.phrases[best].front().text;
  };

  std::vector<Slice> slices;
  std::vector<std::size_t> outliers;
  for (const auto& group : members) {
    if (group.size() < min_size) {
      outliers.insert(outliers.end(), group.begin(), group.end());
      continue;
    }
    Slice s;
    s.id = "s" + std::to_string(slices.size());
    for (auto i : group) s.member_ids.push_back(phrases.ids[i]);
    s.key = medoid_key(group);
    slices.push_back(std::move(s));
  }
  if (!outliers.empty()) {
    std::sort(outliers.begin(), outliers.end());
    Slice s;
    s.id = kOutlierSliceId;
    s.is_outlier = true;
    for (auto i : outliers) s.member_ids.push_back(phrases.ids[i]);
    s.key = medoid_key(outliers);
    slices.push_back(std::move(s));
  }
  return slices;
}

Verdicts demo_verdicts(const core::DemonstrationSet& demos, const llmfn::Backend& backend,
                       const llmfn::RetryPolicy& retry) {
  Verdicts out;
  if (demos.size() < 2) return out;
  const auto spec = llmfn::make_spec(demos, "");
  for (std::size_t i = 0; i < demos.size(); ++i)
    out[demos.demos[i].example_id] = llmfn::cross_validate_demo(spec, backend, i, retry);
  return out;
}

Verdicts collect_verdicts(const core::SessionState& state, const Verdicts& demos) {
  Verdicts out;
  for (const auto& ex : state.pool) {
    if (ex.is_demo()) {
      if (auto it = demos.find(ex.id); it != demos.end()) out[ex.id] = it->second;
      continue;
    }
    if (auto v = core::status_verdict(ex.status)) out[ex.id] = *v;
  }
  return out;
}

SliceStats slice_stats(const Slice& slice, const Verdicts& verdicts) {
  SliceStats s;
  s.n = slice.member_ids.size();
  for (const auto& id : slice.member_ids) {
    auto it = verdicts.find(id);
    if (it == verdicts.end()) continue;
    ++s.m;
    s.k += it->second ? 1 : 0;
  }
  return s;
}

std::vector<std::size_t> rank_slices(const std::vector<SliceReward>& rewards) {
  std::vector<std::size_t> order(rewards.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rewards[a] > rewards[b]; });
  return order;
}

bool is_eligible(const core::Example& e) {
  return !e.surfaced && e.status == core::Status::Unlabeled;
}

SliceCursor::SliceCursor(const std::vector<Slice>& slices, const std::vector<SliceReward>& rewards,
                         const core::SessionState& state) {
  if (slices.size() != rewards.size()) throw std::invalid_argument("one reward per slice required");
  for (auto idx : rank_slices(rewards)) {
    Lane lane{slices[idx].id, {}};
    for (const auto& id : slices[idx].member_ids) {
      const auto* ex = state.find(id);
      if (ex && is_eligible(*ex)) lane.remaining.push_back(id);
    }
    lanes_.push_back(std::move(lane));
  }
}

bool SliceCursor::exhausted() const {
  return std::all_of(lanes_.begin(), lanes_.end(),
                     [](const Lane& l) { return l.remaining.empty(); });
}

std::optional<Candidate> SliceCursor::next(core::Rng& rng) {
  if (exhausted()) return std::nullopt;
  for (;;) {
    Lane& lane = lanes_[position_];
    position_ = (position_ + 1) % lanes_.size();
    if (lane.remaining.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, lane.remaining.size() - 1);
    const std::size_t at = pick(rng);
    Candidate c{std::move(lane.remaining[at]), lane.slice_id};
    lane.remaining[at] = std::move(lane.remaining.back());
    lane.remaining.pop_back();
    return c;
  }
}

std::vector<Candidate> sample_batch(const std::vector<Slice>& slices,
                                    const std::vector<SliceReward>& rewards,
                                    const core::SessionState& state, core::Rng& rng,
                                    std::size_t batch_size) {
  SliceCursor cursor(slices, rewards, state);
  if (cursor.exhausted()) throw EmptyPool();
  std::vector<Candidate> batch;
  while (batch.size() < batch_size) {
    auto c = cursor.next(rng);
    if (!c) break;
    batch.push_back(std::move(*c));
  }
  return batch;
}

SliceModel build_slice_model(const core::SessionState& state, const Verdicts& verdicts,
                             TextCache& cache, std::size_t clusters, std::size_t min_size) {
  SliceModel model;
  model.templates = induce_templates(state.demonstrations, cache);
  model.phrases = assign_key_phrases(state.pool, model.templates, cache);
  model.slices = cluster(model.phrases, cache, clusters, min_size);
  for (const auto& s : model.slices) {
    model.stats.push_back(slice_stats(s, verdicts));
    model.rewards.push_back(reward(model.stats.back(), state.iteration));
  }
  return model;
}

}  // namespace shotlist::slicing
