#include "agri/knowledge.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "agri/errors.hpp"
#include "agri/text.hpp"

namespace agri::kb {

namespace fs = std::filesystem;

Document parse_document(std::string_view raw, std::string_view fallback_id) {
    Document doc;
    doc.doc_id = std::string(fallback_id);
    doc.title = std::string(fallback_id);

    std::string_view body = raw;
    if (auto sep = raw.find("\n---"); sep != std::string_view::npos) {
        auto header = raw.substr(0, sep);
        auto after = raw.find('\n', sep + 1);
        body = after == std::string_view::npos ? std::string_view{} : raw.substr(after + 1);
        for (const auto& line : text::split(header, '\n')) {
            auto colon = line.find(':');
            if (colon == std::string::npos) {
                continue;
            }
            auto key = text::trim(line.substr(0, colon));
            auto value = text::trim(line.substr(colon + 1));
            if (key == "title") {
                doc.title = value;
            } else if (key == "doc_id") {
                doc.doc_id = value;
            }
        }
    }

    std::size_t tokens = 0;
    std::string out;
    for (const auto& line : text::split(body, '\n')) {
        auto t = text::trim(line);
        if (text::starts_with(t, "## ")) {
            doc.sections.push_back({text::trim(t.substr(3)), tokens});
            continue;
        }
        std::istringstream words(t);
        std::string w;
        while (words >> w) {
            if (!out.empty()) {
                out.push_back(' ');
            }
            out += w;
            ++tokens;
        }
    }
    doc.body = std::move(out);
    return doc;
}

Document load_document(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("cannot open document {}", path.string()));
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_document(ss.str(), path.stem().string());
}

std::vector<Document> load_corpus(const fs::path& dir) {
    if (!fs::is_directory(dir)) {
        throw ConfigError(fmt::format("corpus directory {} not found", dir.string()));
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<Document> docs;
    for (const auto& f : files) {
        docs.push_back(load_document(f));
    }
    return docs;
}

Citation Passage::ref() const { return {CitationKind::passage, fmt::format("{}#{}", doc_id, chunk_id)}; }

std::string Passage::citation() const {
    if (section.empty()) {
        return fmt::format("{} ¶{}", title, chunk_id);
    }
    return fmt::format("{} §{} ¶{}", title, section, chunk_id);
}

std::vector<Passage> chunk_document(const Document& doc, ChunkingOptions options) {
    if (options.chunk_tokens == 0 || options.overlap >= options.chunk_tokens) {
        throw std::invalid_argument("chunking requires 0 <= overlap < chunk_tokens");
    }
    std::vector<std::string> words;
    {
        std::istringstream in(doc.body);
        std::string w;
        while (in >> w) {
            words.push_back(std::move(w));
        }
    }
    if (words.empty()) {
        throw EmptyDocument(fmt::format("document '{}' has no text", doc.doc_id));
    }
    const std::size_t step = options.chunk_tokens - options.overlap;
    std::vector<Passage> out;
    std::size_t start = 0;
    int chunk = 1;
    while (true) {
        const std::size_t end = std::min(start + options.chunk_tokens, words.size());
        Passage p;
        p.doc_id = doc.doc_id;
        p.chunk_id = chunk++;
        p.title = doc.title;
        for (const auto& s : doc.sections) {
            if (s.start_token <= start) {
                p.section = s.name;
            }
        }
        for (std::size_t i = start; i < end; ++i) {
            if (i > start) {
                p.text.push_back(' ');
            }
            p.text += words[i];
        }
        p.token_count = end - start;
        out.push_back(std::move(p));
        if (end == words.size()) {
            break;
        }
        start += step;
    }
    return out;
}

Index Index::build(std::vector<Passage> passages, Bm25Params params) {
    Index idx;
    idx.params_ = params;
    idx.passages_ = std::move(passages);
    std::size_t total = 0;
    for (std::size_t i = 0; i < idx.passages_.size(); ++i) {
        const auto& p = idx.passages_[i];
        if (!idx.by_ref_.emplace(std::make_pair(p.doc_id, p.chunk_id), i).second) {
            throw std::invalid_argument(fmt::format("duplicate passage {}#{}", p.doc_id, p.chunk_id));
        }
        auto tokens = text::tokenize(p.text);
        idx.lengths_.push_back(tokens.size());
        total += tokens.size();
        std::map<std::string, std::uint32_t> tf;
        for (auto& t : tokens) {
            ++tf[t];
        }
        for (auto& [term, count] : tf) {
            idx.postings_[term].push_back({i, count});
        }
    }
    idx.avgdl_ = idx.passages_.empty() ? 0.0
                                       : static_cast<double>(total) / static_cast<double>(idx.passages_.size());
    return idx;
}

std::size_t Index::document_frequency(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? 0 : it->second.size();
}

namespace {

std::vector<std::string> unique_terms(std::string_view query) {
    auto terms = text::tokenize(query);
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
    return terms;
}

} // namespace

std::vector<ScoredPassage> Index::search(std::string_view query, std::size_t k) const {
    if (passages_.empty() || k == 0) {
        return {};
    }
    const double n = static_cast<double>(passages_.size());
    std::vector<double> scores(passages_.size(), 0.0);
    for (const auto& term : unique_terms(query)) {
        auto it = postings_.find(term);
        if (it == postings_.end()) {
            continue;
        }
        const double df = static_cast<double>(it->second.size());
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        for (const auto& post : it->second) {
            const double tf = post.tf;
            const double norm =
                params_.k1 * (1.0 - params_.b + params_.b * static_cast<double>(lengths_[post.passage]) / avgdl_);
            scores[post.passage] += idf * tf * (params_.k1 + 1.0) / (tf + norm);
        }
    }
    std::vector<std::size_t> hits;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (scores[i] > 0.0) {
            hits.push_back(i);
        }
    }
    auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) {
            return scores[a] > scores[b];
        }
        return std::tie(passages_[a].doc_id, passages_[a].chunk_id) <
               std::tie(passages_[b].doc_id, passages_[b].chunk_id);
    };
    const auto take = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(take), hits.end(), better);
    std::vector<ScoredPassage> out;
    for (std::size_t i = 0; i < take; ++i) {
        out.push_back({passages_[hits[i]], scores[hits[i]]});
    }
    return out;
}

double Index::score(std::string_view query, std::size_t passage_index) const {
    if (passage_index >= passages_.size()) {
        throw std::out_of_range("passage index");
    }
    const double n = static_cast<double>(passages_.size());
    double total = 0.0;
    for (const auto& term : unique_terms(query)) {
        auto it = postings_.find(term);
        if (it == postings_.end()) {
            continue;
        }
        for (const auto& post : it->second) {
            if (post.passage != passage_index) {
                continue;
            }
            const double df = static_cast<double>(it->second.size());
            const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
            const double tf = post.tf;
            const double norm =
                params_.k1 * (1.0 - params_.b + params_.b * static_cast<double>(lengths_[post.passage]) / avgdl_);
            total += idf * tf * (params_.k1 + 1.0) / (tf + norm);
        }
    }
    return total;
}

const Passage& Index::passage(std::string_view doc_id, int chunk_id) const {
    auto it = by_ref_.find(std::make_pair(std::string(doc_id), chunk_id));
    if (it == by_ref_.end()) {
        throw UnknownPassage(fmt::format("unknown passage {}#{}", doc_id, chunk_id));
    }
    return passages_[it->second];
}

nlohmann::json Index::to_json() const {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& p : passages_) {
        list.push_back({{"doc_id", p.doc_id},
                        {"chunk_id", p.chunk_id},
                        {"title", p.title},
                        {"section", p.section},
                        {"text", p.text},
                        {"token_count", p.token_count}});
    }
    return {{"version", kIndexFormatVersion}, {"k1", params_.k1}, {"b", params_.b}, {"passages", list}};
}

Index Index::from_json(const nlohmann::json& j) {
    try {
        if (j.at("version").get<int>() != kIndexFormatVersion) {
            throw ConfigError("unsupported index version");
        }
        Bm25Params params{j.at("k1").get<double>(), j.at("b").get<double>()};
        std::vector<Passage> passages;
        for (const auto& pj : j.at("passages")) {
            Passage p;
            p.doc_id = pj.at("doc_id").get<std::string>();
            p.chunk_id = pj.at("chunk_id").get<int>();
            p.title = pj.at("title").get<std::string>();
            p.section = pj.value("section", std::string{});
            p.text = pj.at("text").get<std::string>();
            p.token_count = pj.value("token_count", std::size_t{0});
            passages.push_back(std::move(p));
        }
        return build(std::move(passages), params);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("index file: {}", e.what()));
    }
}

std::pair<std::string, int> parse_passage_id(std::string_view id) {
    auto hash = id.rfind('#');
    if (hash == std::string_view::npos || hash == 0) {
        throw UnknownPassage(fmt::format("malformed passage id '{}'", id));
    }
    int chunk = 0;
    auto tail = id.substr(hash + 1);
    auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), chunk);
    if (ec != std::errc{} || ptr != tail.data() + tail.size()) {
        throw UnknownPassage(fmt::format("malformed passage id '{}'", id));
    }
    return {std::string(id.substr(0, hash)), chunk};
}

KnowledgeBase::KnowledgeBase(ChunkingOptions chunking, Bm25Params params)
    : chunking_(chunking), params_(params), index_(std::make_shared<Index>()) {}

std::vector<Passage> KnowledgeBase::ingest(const Document& doc) {
    auto chunks = chunk_document(doc, chunking_);
    std::lock_guard lock(mu_);
    std::erase_if(all_, [&](const Passage& p) { return p.doc_id == doc.doc_id; });
    all_.insert(all_.end(), chunks.begin(), chunks.end());
    index_ = std::make_shared<const Index>(Index::build(all_, params_));
    ++generation_;
    return chunks;
}

void KnowledgeBase::ingest_all(const std::vector<Document>& docs) {
    std::vector<Passage> fresh;
    for (const auto& d : docs) {
        auto chunks = chunk_document(d, chunking_);
        fresh.insert(fresh.end(), chunks.begin(), chunks.end());
    }
    std::lock_guard lock(mu_);
    for (const auto& d : docs) {
        std::erase_if(all_, [&](const Passage& p) { return p.doc_id == d.doc_id; });
    }
    all_.insert(all_.end(), fresh.begin(), fresh.end());
    index_ = std::make_shared<const Index>(Index::build(all_, params_));
    ++generation_;
}

std::shared_ptr<const Index> KnowledgeBase::snapshot() const {
    std::lock_guard lock(mu_);
    return index_;
}

std::uint64_t KnowledgeBase::generation() const {
    std::lock_guard lock(mu_);
    return generation_;
}

std::vector<ScoredPassage> KnowledgeBase::search(std::string_view query, std::size_t k) const {
    return snapshot()->search(query, k);
}

Passage KnowledgeBase::find(std::string_view doc_id, int chunk_id) const {
    return snapshot()->passage(doc_id, chunk_id);
}

void KnowledgeBase::save(const fs::path& path) const {
    auto idx = snapshot();
    std::ofstream out(path);
    if (!out) {
        throw ConfigError(fmt::format("cannot write index {}", path.string()));
    }
    out << idx->to_json().dump() << '\n';
}

std::unique_ptr<KnowledgeBase> KnowledgeBase::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(fmt::format("cannot open index {}", path.string()));
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(fmt::format("index file: {}", e.what()));
    }
    auto idx = Index::from_json(j);
    auto kb = std::make_unique<KnowledgeBase>(ChunkingOptions{}, idx.params());
    kb->all_ = idx.passages();
    kb->index_ = std::make_shared<const Index>(std::move(idx));
    kb->generation_ = 1;
    return kb;
}

} // namespace agri::kb
