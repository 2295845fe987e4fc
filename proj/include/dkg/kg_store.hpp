#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dkg/sparse.hpp"
#include "dkg/tensor.hpp"

namespace dkg {

inline constexpr std::string_view kToSelf = "ToSelf";

/// Lowercase ASCII letters and collapse runs of whitespace to one space;
/// leading and trailing whitespace is dropped.
std::string normalize_name(std::string_view raw);

/// Bidirectional name <-> dense index map keyed on normalized names.
/// The first raw spelling seen for a key is kept for display.
class Vocab {
 public:
  /// Returns the index of `raw`, inserting it if new.
  std::uint32_t add(std::string_view raw);
  std::optional<std::uint32_t> find(std::string_view raw) const;
  std::uint32_t at(std::string_view raw) const;  // throws data_error
  bool contains(std::string_view raw) const { return find(raw).has_value(); }

  const std::string& name(std::uint32_t i) const { return display_.at(i); }
  const std::string& key(std::uint32_t i) const { return keys_.at(i); }
  std::size_t size() const noexcept { return keys_.size(); }
  std::span<const std::string> names() const noexcept { return display_; }

  /// FNV-1a over the normalized keys in index order.
  std::uint64_t content_hash() const;

 private:
  std::vector<std::string> keys_;
  std::vector<std::string> display_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct StringTriple {
  std::string head;
  std::string relation;
  std::string tail;
  friend bool operator==(const StringTriple&, const StringTriple&) = default;
};

struct Triple {
  std::uint32_t head = 0;
  std::uint32_t relation = 0;
  std::uint32_t tail = 0;
  friend bool operator==(const Triple&, const Triple&) = default;
};

struct Vocabs {
  Vocab entities;
  Vocab relations;
};

/// Indices are assigned in first-appearance order (head, relation, tail per
/// line). Throws on empty input or on names containing TAB/newline.
Vocabs build_vocabs(std::span<const StringTriple> triples);

/// Maps names to indices and collapses duplicate triples, keeping the first
/// occurrence's position.
std::vector<Triple> index_triples(std::span<const StringTriple> triples,
                                  const Vocabs& vocabs);

/// Reified knowledge graph: three triple-indexed one-hot matrices
/// (N_T x N_E head, N_T x N_R relation, N_T x N_E tail).
///
/// Immutable once built. An auxiliary head index (entity -> outgoing triple
/// rows) supports symbolic frontier expansion for path ranking.
class ReifiedKG {
 public:
  ReifiedKG() = default;
  ReifiedKG(std::size_t n_entities, std::size_t n_relations,
            std::span<const Triple> triples);

  std::size_t n_entities() const noexcept { return n_entities_; }
  std::size_t n_relations() const noexcept { return n_relations_; }
  std::size_t n_triples() const noexcept { return m_h_.rows(); }
  std::size_t nnz() const noexcept {
    return m_h_.nnz() + m_r_.nnz() + m_t_.nnz();
  }

  const BinaryCsr& m_h() const noexcept { return m_h_; }
  const BinaryCsr& m_r() const noexcept { return m_r_; }
  const BinaryCsr& m_t() const noexcept { return m_t_; }

  Triple triple(std::size_t k) const {
    return {m_h_.row(k)[0], m_r_.row(k)[0], m_t_.row(k)[0]};
  }
  std::vector<Triple> triples() const;

  /// Rows of triples whose head is `entity`, in row order.
  std::span<const std::uint32_t> outgoing(std::uint32_t entity) const {
    return {out_rows_.data() + out_ptr_[entity],
            out_rows_.data() + out_ptr_[entity + 1]};
  }

  std::size_t memory_bytes() const noexcept;

 private:
  std::size_t n_entities_ = 0;
  std::size_t n_relations_ = 0;
  BinaryCsr m_h_, m_r_, m_t_;
  std::vector<std::uint64_t> out_ptr_{0};
  std::vector<std::uint32_t> out_rows_;
};

/// Builds the reified matrices; row k encodes triples[k].
ReifiedKG reify(std::span<const Triple> triples, std::size_t n_entities,
                std::size_t n_relations);

/// Appends one (e, ToSelf, e) row per entity after the existing rows and
/// registers ToSelf in `relations`. Throws if ToSelf is already present.
ReifiedKG add_to_self(const ReifiedKG& kg, const Vocab& entities,
                      Vocab& relations);

/// Row i of the result is row permutation[i] of the input.
ReifiedKG permute_triples(const ReifiedKG& kg,
                          std::span<const std::uint32_t> permutation);

/// Indicator vector over entities for the named initial entities.
Tensor initial_entity_vector(std::span<const std::string> names,
                             const Vocab& entities);

/// Vocabularies plus the augmented reified store, as used by the model.
struct KnowledgeGraph {
  Vocabs vocabs;
  ReifiedKG reified;

  std::uint32_t to_self() const { return vocabs.relations.at(kToSelf); }
};

/// Ingest string triples: vocab construction, dedup, reify, ToSelf.
KnowledgeGraph build_knowledge_graph(std::span<const StringTriple> triples);

/// head TAB relation TAB tail per line; '#' lines and blank lines skipped.
std::vector<StringTriple> read_triple_file(const std::string& path);
/// Streams a triple file straight into an augmented KnowledgeGraph without
/// materializing the string triples; same result as
/// build_knowledge_graph(read_triple_file(path)).
KnowledgeGraph load_knowledge_graph(const std::string& path);
void write_triple_file(const std::string& path,
                       std::span<const StringTriple> triples);

}  // namespace dkg
