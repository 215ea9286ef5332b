// Knowledge-base index builder and query tool.

#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "agri/knowledge.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Extension-manual retrieval index"};
    app.require_subcommand(1);

    auto* build = app.add_subcommand("build", "Chunk a corpus directory and write the index");
    std::string corpus;
    std::string out;
    std::size_t chunk_tokens = 200;
    std::size_t overlap = 40;
    build->add_option("--corpus", corpus, "Directory of *.txt documents")->required()->check(CLI::ExistingDirectory);
    build->add_option("--out", out, "Index file")->required();
    build->add_option("--chunk-tokens", chunk_tokens)->check(CLI::PositiveNumber);
    build->add_option("--overlap", overlap);

    auto* query = app.add_subcommand("query", "Search an index");
    std::string index;
    std::string q;
    std::size_t k = 4;
    query->add_option("--index", index, "Index file")->required()->check(CLI::ExistingFile);
    query->add_option("--q", q, "Query text")->required();
    query->add_option("--k", k)->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*build) {
            agri::kb::KnowledgeBase kb({chunk_tokens, overlap});
            const auto docs = agri::kb::load_corpus(corpus);
            kb.ingest_all(docs);
            kb.save(out);
            std::cerr << fmt::format("{} documents, {} passages -> {}\n", docs.size(), kb.snapshot()->size(), out);
        } else if (*query) {
            const auto kb = agri::kb::KnowledgeBase::load(index);
            int rank = 0;
            for (const auto& hit : kb->search(q, k)) {
                std::cout << fmt::format("{}\t{:.4f}\t{}\t{}\n", ++rank, hit.score, hit.passage.ref().marker(),
                                         hit.passage.citation());
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "kb: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
