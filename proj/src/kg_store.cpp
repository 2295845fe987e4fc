#include "dkg/kg_store.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <tuple>

#include "dkg/error.hpp"

namespace dkg {

std::string normalize_name(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char ch : raw) {
    const auto c = static_cast<unsigned char>(ch);
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
        c == '\v') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
  }
  return out;
}

std::uint32_t Vocab::add(std::string_view raw) {
  std::string key = normalize_name(raw);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(keys_.size());
  index_.emplace(key, id);
  keys_.push_back(std::move(key));
  display_.emplace_back(raw);
  return id;
}

std::optional<std::uint32_t> Vocab::find(std::string_view raw) const {
  auto it = index_.find(normalize_name(raw));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t Vocab::at(std::string_view raw) const {
  if (auto id = find(raw)) return *id;
  throw data_error("unknown name '" + std::string(raw) + "'");
}

std::uint64_t Vocab::content_hash() const {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 1099511628211ull;
  };
  for (const auto& k : keys_) {
    for (char c : k) mix(static_cast<unsigned char>(c));
    mix(0);
  }
  return h;
}

namespace {

void check_name(const std::string& name, std::size_t line) {
  if (name.find_first_of("\t\n") != std::string::npos)
    throw data_error("triple " + std::to_string(line) +
                     ": name contains TAB or newline: '" + name + "'");
  if (normalize_name(name).empty())
    throw data_error("triple " + std::to_string(line) + ": empty name");
}

// Stable dedup keeping the first occurrence of each triple.
std::vector<Triple> dedup_triples(std::vector<Triple> in) {
  std::vector<std::uint32_t> order(in.size());
  std::iota(order.begin(), order.end(), 0u);
  auto key = [&](std::uint32_t i) {
    return std::tuple(in[i].head, in[i].relation, in[i].tail, i);
  };
  std::sort(order.begin(), order.end(),
            [&](std::uint32_t a, std::uint32_t b) { return key(a) < key(b); });
  std::vector<char> keep(in.size(), 1);
  for (std::size_t i = 1; i < order.size(); ++i)
    if (in[order[i]] == in[order[i - 1]]) keep[order[i]] = 0;
  std::vector<Triple> out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i)
    if (keep[i]) out.push_back(in[i]);
  return out;
}

}  // namespace

Vocabs build_vocabs(std::span<const StringTriple> triples) {
  if (triples.empty()) throw data_error("empty KG");
  Vocabs v;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const auto& t = triples[i];
    check_name(t.head, i + 1);
    check_name(t.relation, i + 1);
    check_name(t.tail, i + 1);
    v.entities.add(t.head);
    v.relations.add(t.relation);
    v.entities.add(t.tail);
  }
  return v;
}

std::vector<Triple> index_triples(std::span<const StringTriple> triples,
                                  const Vocabs& vocabs) {
  std::vector<Triple> out;
  out.reserve(triples.size());
  for (const auto& t : triples)
    out.push_back({vocabs.entities.at(t.head), vocabs.relations.at(t.relation),
                   vocabs.entities.at(t.tail)});
  return dedup_triples(std::move(out));
}

ReifiedKG::ReifiedKG(std::size_t n_entities, std::size_t n_relations,
                     std::span<const Triple> triples)
    : n_entities_(n_entities), n_relations_(n_relations) {
  std::vector<std::uint32_t> h(triples.size()), r(triples.size()),
      t(triples.size());
  for (std::size_t k = 0; k < triples.size(); ++k) {
    const auto& tr = triples[k];
    if (tr.head >= n_entities || tr.tail >= n_entities ||
        tr.relation >= n_relations)
      throw data_error("triple " + std::to_string(k) +
                       ": index out of range (N_E=" +
                       std::to_string(n_entities) +
                       ", N_R=" + std::to_string(n_relations) + ")");
    h[k] = tr.head;
    r[k] = tr.relation;
    t[k] = tr.tail;
  }
  // Counting sort of rows by head entity.
  out_ptr_.assign(n_entities + 1, 0);
  for (auto e : h) ++out_ptr_[e + 1];
  std::partial_sum(out_ptr_.begin(), out_ptr_.end(), out_ptr_.begin());
  out_rows_.resize(h.size());
  std::vector<std::uint64_t> cursor(out_ptr_.begin(), out_ptr_.end() - 1);
  for (std::size_t k = 0; k < h.size(); ++k)
    out_rows_[cursor[h[k]]++] = static_cast<std::uint32_t>(k);

  m_h_ = BinaryCsr::one_hot_rows(n_entities, std::move(h));
  m_r_ = BinaryCsr::one_hot_rows(n_relations, std::move(r));
  m_t_ = BinaryCsr::one_hot_rows(n_entities, std::move(t));
}

std::vector<Triple> ReifiedKG::triples() const {
  std::vector<Triple> out(n_triples());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = triple(k);
  return out;
}

std::size_t ReifiedKG::memory_bytes() const noexcept {
  return m_h_.memory_bytes() + m_r_.memory_bytes() + m_t_.memory_bytes() +
         out_ptr_.capacity() * sizeof(std::uint64_t) +
         out_rows_.capacity() * sizeof(std::uint32_t);
}

ReifiedKG reify(std::span<const Triple> triples, std::size_t n_entities,
                std::size_t n_relations) {
  return ReifiedKG(n_entities, n_relations, triples);
}

ReifiedKG add_to_self(const ReifiedKG& kg, const Vocab& entities,
                      Vocab& relations) {
  if (relations.contains(kToSelf))
    throw data_error("relation ToSelf already present; KG already augmented");
  if (entities.size() != kg.n_entities() ||
      relations.size() != kg.n_relations())
    throw data_error("add_to_self: vocab sizes do not match KG");
  const auto self = relations.add(kToSelf);
  std::vector<Triple> all = kg.triples();
  all.reserve(all.size() + kg.n_entities());
  for (std::uint32_t e = 0; e < kg.n_entities(); ++e) all.push_back({e, self, e});
  return ReifiedKG(kg.n_entities(), relations.size(), all);
}

ReifiedKG permute_triples(const ReifiedKG& kg,
                          std::span<const std::uint32_t> permutation) {
  const std::size_t n = kg.n_triples();
  if (permutation.size() != n)
    throw data_error("permutation length " + std::to_string(permutation.size()) +
                     " != N_T " + std::to_string(n));
  std::vector<char> seen(n, 0);
  for (auto p : permutation) {
    if (p >= n || seen[p]) throw data_error("permutation is not a bijection");
    seen[p] = 1;
  }
  std::vector<Triple> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = kg.triple(permutation[i]);
  return ReifiedKG(kg.n_entities(), kg.n_relations(), out);
}

Tensor initial_entity_vector(std::span<const std::string> names,
                             const Vocab& entities) {
  if (names.empty()) throw data_error("no initial entities given");
  Tensor e(entities.size(), 1);
  std::string missing;
  for (const auto& n : names) {
    if (auto id = entities.find(n)) {
      e[*id] = 1.0;
    } else {
      if (!missing.empty()) missing += ", ";
      missing += n;
    }
  }
  if (!missing.empty()) throw data_error("unknown entities: " + missing);
  return e;
}

KnowledgeGraph build_knowledge_graph(std::span<const StringTriple> triples) {
  KnowledgeGraph kg;
  kg.vocabs = build_vocabs(triples);
  if (kg.vocabs.relations.contains(kToSelf))
    throw data_error("input triples already use the reserved relation ToSelf");
  auto indexed = index_triples(triples, kg.vocabs);
  const auto self = kg.vocabs.relations.add(kToSelf);
  const auto n_e = static_cast<std::uint32_t>(kg.vocabs.entities.size());
  indexed.reserve(indexed.size() + n_e);
  for (std::uint32_t e = 0; e < n_e; ++e) indexed.push_back({e, self, e});
  kg.reified = reify(indexed, n_e, kg.vocabs.relations.size());
  return kg;
}

namespace {

// Calls `sink(triple, lineno)` for each data line of a triple file.
template <typename Sink>
void scan_triple_file(const std::string& path, Sink&& sink) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open triple file '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto a = line.find('\t');
    const auto b = a == std::string::npos ? a : line.find('\t', a + 1);
    if (b == std::string::npos || line.find('\t', b + 1) != std::string::npos)
      throw data_error(path + ":" + std::to_string(lineno) +
                       ": expected 3 TAB-separated fields");
    StringTriple t{line.substr(0, a), line.substr(a + 1, b - a - 1),
                   line.substr(b + 1)};
    if (normalize_name(t.head).empty() || normalize_name(t.relation).empty() ||
        normalize_name(t.tail).empty())
      throw data_error(path + ":" + std::to_string(lineno) + ": empty field");
    sink(std::move(t), lineno);
  }
}

}  // namespace

std::vector<StringTriple> read_triple_file(const std::string& path) {
  std::vector<StringTriple> out;
  scan_triple_file(path, [&](StringTriple t, std::size_t) {
    out.push_back(std::move(t));
  });
  return out;
}

KnowledgeGraph load_knowledge_graph(const std::string& path) {
  KnowledgeGraph kg;
  std::vector<Triple> indexed;
  scan_triple_file(path, [&](StringTriple t, std::size_t lineno) {
    if (normalize_name(t.relation) == normalize_name(kToSelf))
      throw data_error(path + ":" + std::to_string(lineno) +
                       ": relation ToSelf is reserved");
    const auto h = kg.vocabs.entities.add(t.head);
    const auto r = kg.vocabs.relations.add(t.relation);
    const auto tl = kg.vocabs.entities.add(t.tail);
    indexed.push_back({h, r, tl});
  });
  if (indexed.empty()) throw data_error("empty KG");
  indexed = dedup_triples(std::move(indexed));
  const auto self = kg.vocabs.relations.add(kToSelf);
  const auto n_e = static_cast<std::uint32_t>(kg.vocabs.entities.size());
  indexed.reserve(indexed.size() + n_e);
  for (std::uint32_t e = 0; e < n_e; ++e) indexed.push_back({e, self, e});
  kg.reified = reify(indexed, n_e, kg.vocabs.relations.size());
  return kg;
}

void write_triple_file(const std::string& path,
                       std::span<const StringTriple> triples) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write triple file '" + path + "'");
  for (const auto& t : triples)
    out << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
  if (!out) throw data_error("write failed for '" + path + "'");
}

}  // namespace dkg
