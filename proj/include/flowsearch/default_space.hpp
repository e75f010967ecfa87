#pragma once

// The shipped RAG search space: five top-level flows (one imperative RAG flow and
// four agents that use it as a tool), with the module grid of the RAG flow.

#include <string>
#include <vector>

#include "flowsearch/space.hpp"

namespace flowsearch {

namespace names {
inline const std::vector<std::string> kSmallLlms = {"anthropic-haiku-35", "o3-mini", "gpt-4o-mini", "gemini-flash"};

inline const std::vector<std::string> kEmbeddings = {
    "BAAI/bge-small-en-v1.5",
    "BAAI/bge-large-en-v1.5",
    "thenlper/gte-large",
    "mxbai-embed-large-v1",
    "WhereIsAI/UAE-Large-V1",
    "avsolatorio/GIST-large-Embedding-v0",
    "w601sxs/b1ade-embed",
    "Labib11/MUG-B-1.6",
    "all-MiniLM-L12-v2",
    "paraphrase-multilingual-mpnet-base-v2",
    "BAAI/bge-base-en-v1.5",
};

inline const std::vector<std::string> kFlows = {"rag", "sub_question_rag", "critique_rag_agent", "react_rag_agent",
                                                "lats_rag_agent"};
inline const std::vector<std::string> kAgenticFlows = {"sub_question_rag", "critique_rag_agent", "react_rag_agent",
                                                       "lats_rag_agent"};
} // namespace names

namespace detail {

inline ParamSpec cat(std::string name, std::vector<std::string> values, std::string desc = {},
                     std::optional<std::string> def = std::nullopt) {
    ParamSpec p{std::move(name), Categorical{std::move(values)}, std::move(desc), std::nullopt};
    if (def) p.default_value = Value{*def};
    return p;
}

inline ParamSpec integer(std::string name, std::int64_t lo, std::int64_t hi, std::int64_t step, std::string desc = {},
                         std::optional<std::int64_t> def = std::nullopt) {
    ParamSpec p{std::move(name), Integer{lo, hi, step}, std::move(desc), std::nullopt};
    if (def) p.default_value = Value{*def};
    return p;
}

inline ParamSpec real(std::string name, double lo, double hi, bool log, std::string desc = {},
                      std::optional<double> def = std::nullopt) {
    ParamSpec p{std::move(name), Real{lo, hi, log, 64}, std::move(desc), std::nullopt};
    if (def) p.default_value = Value{*def};
    return p;
}

inline std::string agent_prefix(const std::string& flow) {
    if (flow == "sub_question_rag") return "sub_question";
    if (flow == "critique_rag_agent") return "critique";
    if (flow == "react_rag_agent") return "react";
    return "lats";
}

} // namespace detail

inline SearchSpace default_space() {
    using detail::cat;
    using detail::integer;
    using detail::real;
    const std::vector<std::string> flag = {"false", "true"};

    std::vector<ParamSpec> p = {
        cat("flow", names::kFlows, "top-level flow"),
        cat("llm", names::kSmallLlms, "synthesizing LLM", "gpt-4o-mini"),
        cat("splitter", {"recursive", "token", "sentence"}, "text splitter", "sentence"),
        real("chunk_size", 256, 4096, true, "splitter chunk size in tokens", 1024.0),
        integer("chunk_overlap_pct", 0, 70, 10, "chunk overlap, percent of chunk size", 10),
        cat("retriever", {"dense", "sparse", "fusion"}, "retriever", "dense"),
        cat("embedding", names::kEmbeddings, "embedding model for dense retrieval", "BAAI/bge-small-en-v1.5"),
        integer("top_k", 2, 20, 1, "retrieved chunks", 5),
        integer("fusion_num_queries", 1, 20, 1, "generated queries for fusion retrieval", 4),
        cat("fusion_mode", {"reciprocal_rerank", "relative_score", "dist_based_score", "simple"}, "fusion scheme"),
        integer("fusion_bm25_weight_pct", 10, 90, 10, "sparse share of fused scores, percent", 50),
        cat("reranker_enabled", flag, "rerank retrieved chunks", "false"),
        cat("reranker_llm", names::kSmallLlms, "reranking LLM", "gpt-4o-mini"),
        integer("reranker_top_k", 2, 20, 1, "chunks kept after reranking", 5),
        cat("hyde_enabled", flag, "hypothetical document embeddings", "false"),
        cat("hyde_llm", names::kSmallLlms, "HyDE generator LLM", "gpt-4o-mini"),
        cat("prompt", {"default", "concise", "cot"}, "prompt template", "default"),
        cat("few_shot_enabled", flag, "dynamic few-shot retriever", "false"),
        integer("few_shot_top_k", 2, 20, 1, "few-shot examples", 3),
        cat("few_shot_embedding", names::kEmbeddings, "few-shot example embedding", "all-MiniLM-L12-v2"),
        cat("additional_context_enabled", flag, "add neighbouring chunks", "false"),
        real("additional_context_num_nodes", 2, 20, true, "neighbouring chunks added", 5.0),
    };

    std::vector<ActivationRule> rules = {
        {"embedding", "retriever", {"dense", "fusion"}},
        {"fusion_num_queries", "retriever", {"fusion"}},
        {"fusion_mode", "retriever", {"fusion"}},
        {"fusion_bm25_weight_pct", "retriever", {"fusion"}},
        {"reranker_llm", "reranker_enabled", {"true"}},
        {"reranker_top_k", "reranker_enabled", {"true"}},
        {"hyde_llm", "hyde_enabled", {"true"}},
        {"few_shot_top_k", "few_shot_enabled", {"true"}},
        {"few_shot_embedding", "few_shot_enabled", {"true"}},
        {"additional_context_num_nodes", "additional_context_enabled", {"true"}},
    };

    // Agentic flows carry their own knobs on top of the RAG tool they wrap.
    for (const auto& flow : names::kAgenticFlows) {
        const auto pre = detail::agent_prefix(flow);
        p.push_back(cat(pre + "_llm", names::kSmallLlms, "agent reasoning LLM", "gpt-4o-mini"));
        p.push_back(integer(pre + "_max_steps", 1, 20, 1, "agent step budget", 5));
        p.push_back(real(pre + "_temperature", 0.0, 1.0, false, "agent sampling temperature", 0.0));
        for (const auto* suffix : {"_llm", "_max_steps", "_temperature"}) rules.push_back({pre + suffix, "flow", {flow}});
    }
    return SearchSpace(std::move(p), std::move(rules), "flow");
}

} // namespace flowsearch
