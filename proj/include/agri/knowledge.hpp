#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "agri/common.hpp"

namespace agri::kb {

struct Section {
    std::string name;
    /// Index of the section's first whitespace token in the document body.
    std::size_t start_token = 0;
};

/// An extension-manual document. Source files carry a small header:
///
///   title: Soil acidity management
///   doc_id: soil-acidity
///   ---
///   ## Liming
///   Body text ...
///
/// "## " lines open sections and are not part of the body.
struct Document {
    std::string doc_id;
    std::string title;
    std::string body;
    std::vector<Section> sections;
};

[[nodiscard]] Document parse_document(std::string_view raw, std::string_view fallback_id);
[[nodiscard]] Document load_document(const std::filesystem::path& path);
/// Every *.txt file of a directory, sorted by file name.
[[nodiscard]] std::vector<Document> load_corpus(const std::filesystem::path& dir);

struct Passage {
    std::string doc_id;
    /// 1-based position of the chunk within its document.
    int chunk_id = 0;
    std::string title;
    std::string section;
    std::string text;
    std::size_t token_count = 0;

    [[nodiscard]] Citation ref() const;
    /// "title §section ¶chunk"
    [[nodiscard]] std::string citation() const;
};

struct ChunkingOptions {
    std::size_t chunk_tokens = 200;
    std::size_t overlap = 40;
};

/// Splits a document into windows of `chunk_tokens` whitespace tokens where
/// consecutive windows share `overlap` tokens. Throws agri::EmptyDocument.
[[nodiscard]] std::vector<Passage> chunk_document(const Document& doc, ChunkingOptions options = {});

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct ScoredPassage {
    Passage passage;
    double score = 0.0;
};

/// Immutable BM25 index over passages.
///
/// score(q, p) = sum over distinct query terms t present in p of
///     idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |p| / avgdl))
/// idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5))
/// Lengths count tokens as produced by text::tokenize.
class Index {
  public:
    Index() = default;
    static Index build(std::vector<Passage> passages, Bm25Params params = {});

    /// At most k passages with a positive score, best first; ties broken by
    /// (doc_id, chunk_id) ascending.
    [[nodiscard]] std::vector<ScoredPassage> search(std::string_view query, std::size_t k = 4) const;
    /// BM25 score of one passage (by position) for a query.
    [[nodiscard]] double score(std::string_view query, std::size_t passage_index) const;

    /// Throws agri::UnknownPassage.
    [[nodiscard]] const Passage& passage(std::string_view doc_id, int chunk_id) const;
    [[nodiscard]] const std::vector<Passage>& passages() const { return passages_; }
    [[nodiscard]] std::size_t size() const { return passages_.size(); }
    [[nodiscard]] double avgdl() const { return avgdl_; }
    [[nodiscard]] const Bm25Params& params() const { return params_; }
    [[nodiscard]] std::size_t document_frequency(const std::string& term) const;

    [[nodiscard]] nlohmann::json to_json() const;
    static Index from_json(const nlohmann::json& j);

  private:
    struct Posting {
        std::size_t passage;
        std::uint32_t tf;
    };

    std::vector<Passage> passages_;
    std::vector<std::size_t> lengths_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    std::map<std::pair<std::string, int>, std::size_t, std::less<>> by_ref_;
    double avgdl_ = 0.0;
    Bm25Params params_;
};

/// Retrieval interface consumed by the pipeline; an embedding-based backend
/// can implement it in place of BM25.
class Retriever {
  public:
    virtual ~Retriever() = default;
    [[nodiscard]] virtual std::vector<ScoredPassage> search(std::string_view query, std::size_t k = 4) const = 0;
    /// Throws agri::UnknownPassage.
    [[nodiscard]] virtual Passage find(std::string_view doc_id, int chunk_id) const = 0;

    [[nodiscard]] std::string cite(std::string_view doc_id, int chunk_id) const {
        return find(doc_id, chunk_id).citation();
    }
};

/// Splits a "doc#chunk" passage id. Throws agri::UnknownPassage on malformed ids.
[[nodiscard]] std::pair<std::string, int> parse_passage_id(std::string_view id);

/// Ingests documents and serves searches from the current index generation.
/// Each ingest builds a new generation and swaps it in atomically; in-flight
/// searches keep the generation they started with.
class KnowledgeBase final : public Retriever {
  public:
    explicit KnowledgeBase(ChunkingOptions chunking = {}, Bm25Params params = {});

    std::vector<Passage> ingest(const Document& doc);
    void ingest_all(const std::vector<Document>& docs);

    [[nodiscard]] std::vector<ScoredPassage> search(std::string_view query, std::size_t k = 4) const override;
    [[nodiscard]] Passage find(std::string_view doc_id, int chunk_id) const override;

    [[nodiscard]] std::shared_ptr<const Index> snapshot() const;
    [[nodiscard]] std::uint64_t generation() const;

    void save(const std::filesystem::path& path) const;
    static std::unique_ptr<KnowledgeBase> load(const std::filesystem::path& path);

  private:
    ChunkingOptions chunking_;
    Bm25Params params_;
    mutable std::mutex mu_;
    std::vector<Passage> all_;
    std::shared_ptr<const Index> index_;
    std::uint64_t generation_ = 0;
};

inline constexpr int kIndexFormatVersion = 1;

} // namespace agri::kb
