#pragma once

// Built-in simulated benchmarks small enough to enumerate.
//
// desk-1: 6 categorical + 4 integer params, 3 top-level flows, 18,432 configs.
// desk-2: flag-gated modules (reranker, HyDE, few-shot) whose value depends on
// other choices, 32,400 configs.

#include <string>

#include "flowsearch/default_space.hpp"
#include "flowsearch/sim.hpp"

namespace flowsearch {

inline SearchSpace desk1_space() {
    using detail::cat;
    using detail::integer;
    std::vector<ParamSpec> p = {
        cat("flow", {"rag", "react_rag_agent", "critique_rag_agent"}, "top-level flow"),
        cat("llm", names::kSmallLlms, "synthesizing LLM", "gpt-4o-mini"),
        cat("retriever", {"dense", "sparse", "fusion"}, "retriever", "dense"),
        cat("embedding", {"BAAI/bge-small-en-v1.5", "BAAI/bge-large-en-v1.5", "thenlper/gte-large"}, "dense embedding",
            "BAAI/bge-small-en-v1.5"),
        cat("splitter", {"sentence", "token"}, "text splitter", "sentence"),
        cat("prompt", {"default", "cot"}, "prompt template", "default"),
        integer("top_k", 2, 8, 2, "retrieved chunks", 4),
        integer("chunk_size", 512, 2048, 512, "chunk size in tokens", 1024),
        integer("fusion_weight", 20, 80, 20, "sparse share of fused scores, percent", 40),
        integer("max_iter", 2, 5, 1, "agent iteration budget", 3),
    };
    std::vector<ActivationRule> rules = {
        {"embedding", "retriever", {"dense"}},
        {"fusion_weight", "retriever", {"fusion"}},
        {"max_iter", "flow", {"react_rag_agent", "critique_rag_agent"}},
    };
    return SearchSpace(std::move(p), std::move(rules), "flow");
}

inline SimBenchmarkSpec desk1() {
    SimBenchmarkSpec s;
    s.name = "desk-1";
    s.space = desk1_space();
    s.seed = 42;
    s.num_questions = 100;
    s.bias = -0.6;
    s.weights = {
        {"llm", {{"anthropic-haiku-35", 0.2}, {"o3-mini", 0.9}, {"gpt-4o-mini", 0.5}, {"gemini-flash", 0.0}}},
        {"flow", {{"rag", 0.0}, {"react_rag_agent", 0.35}, {"critique_rag_agent", 0.6}}},
        {"retriever", {{"dense", 0.3}, {"sparse", -0.3}, {"fusion", 0.45}}},
        {"embedding", {{"BAAI/bge-small-en-v1.5", 0.0}, {"BAAI/bge-large-en-v1.5", 0.25}, {"thenlper/gte-large", 0.15}}},
        {"splitter", {{"sentence", 0.1}, {"token", 0.0}}},
        {"prompt", {{"default", 0.0}, {"cot", 0.3}}},
    };
    s.numeric = {
        {"top_k", 0.5, -0.6, 0.6},
        {"chunk_size", 0.0, -0.8, 0.35},
        {"fusion_weight", 0.0, -1.0, 0.5},
        {"max_iter", 0.4, 0.0, 0.5},
    };
    s.interactions = {
        {"prompt", "cot", "llm", "o3-mini", -0.4},
        {"flow", "critique_rag_agent", "llm", "gemini-flash", 0.3},
        {"retriever", "fusion", "top_k", "", 0.3},
    };
    s.tier_param = "llm";
    s.tier_cost = {{"anthropic-haiku-35", 0.0008}, {"o3-mini", 0.0011}, {"gpt-4o-mini", 0.00015}, {"gemini-flash", 0.0001}};
    s.tier_latency = {{"anthropic-haiku-35", 1.6}, {"o3-mini", 4.0}, {"gpt-4o-mini", 1.2}, {"gemini-flash", 0.9}};
    s.multipliers = {
        {"flow", {{"react_rag_agent", 2.5}, {"critique_rag_agent", 4.0}}},
        {"retriever", {{"sparse", 0.9}, {"fusion", 1.6}}},
        {"prompt", {{"cot", 1.5}}},
        {"embedding", {{"BAAI/bge-large-en-v1.5", 1.1}}},
    };
    s.cost_factors = {{"top_k", 1.5}, {"chunk_size", 0.8}, {"max_iter", 1.0}};
    s.cost_sigma = 0.3;
    s.latency_sigma = 0.2;
    s.error_rate = {{"gemini-flash", 0.01}, {"anthropic-haiku-35", 0.005}};
    return s;
}

inline SearchSpace desk2_space() {
    using detail::cat;
    using detail::integer;
    const std::vector<std::string> flag = {"false", "true"};
    std::vector<ParamSpec> p = {
        cat("flow", {"rag", "sub_question_rag", "lats_rag_agent"}, "top-level flow"),
        cat("llm", names::kSmallLlms, "synthesizing LLM", "gpt-4o-mini"),
        cat("retriever", {"dense", "sparse", "fusion"}, "retriever", "dense"),
        cat("reranker_enabled", flag, "rerank retrieved chunks", "false"),
        cat("reranker_llm", names::kSmallLlms, "reranking LLM", "gpt-4o-mini"),
        cat("hyde_enabled", flag, "hypothetical document embeddings", "false"),
        cat("hyde_llm", names::kSmallLlms, "HyDE generator LLM", "gpt-4o-mini"),
        integer("top_k", 2, 10, 4, "retrieved chunks", 6),
        cat("few_shot_enabled", flag, "dynamic few-shot retriever", "false"),
        integer("few_shot_top_k", 2, 6, 2, "few-shot examples", 4),
        cat("sub_question_llm", names::kSmallLlms, "decomposition LLM", "gpt-4o-mini"),
        integer("lats_max_steps", 1, 4, 1, "tree-search step budget", 2),
    };
    std::vector<ActivationRule> rules = {
        {"reranker_llm", "reranker_enabled", {"true"}},
        {"hyde_llm", "hyde_enabled", {"true"}},
        {"few_shot_top_k", "few_shot_enabled", {"true"}},
        {"sub_question_llm", "flow", {"sub_question_rag"}},
        {"lats_max_steps", "flow", {"lats_rag_agent"}},
    };
    return SearchSpace(std::move(p), std::move(rules), "flow");
}

inline SimBenchmarkSpec desk2() {
    SimBenchmarkSpec s;
    s.name = "desk-2";
    s.space = desk2_space();
    s.seed = 7;
    s.num_questions = 100;
    s.bias = -0.9;
    s.weights = {
        {"llm", {{"anthropic-haiku-35", 0.3}, {"o3-mini", 0.8}, {"gpt-4o-mini", 0.45}, {"gemini-flash", 0.0}}},
        {"flow", {{"rag", 0.0}, {"sub_question_rag", 0.2}, {"lats_rag_agent", 0.3}}},
        {"retriever", {{"dense", 0.2}, {"sparse", 0.0}, {"fusion", 0.3}}},
        {"reranker_llm", {{"anthropic-haiku-35", 0.1}, {"o3-mini", 0.2}, {"gpt-4o-mini", 0.15}, {"gemini-flash", -0.1}}},
        {"hyde_enabled", {{"true", -0.2}}},
        {"sub_question_llm", {{"o3-mini", 0.4}, {"gpt-4o-mini", 0.2}}},
    };
    s.numeric = {
        {"top_k", 0.2, -0.5, 0.5},
        {"few_shot_top_k", 0.3, 0.0, 0.5},
        {"lats_max_steps", 0.6, -0.3, 0.8},
    };
    // Module value hinges on the surrounding choices.
    s.interactions = {
        {"hyde_enabled", "true", "retriever", "dense", 0.8},
        {"hyde_enabled", "true", "retriever", "sparse", -0.4},
        {"reranker_enabled", "true", "top_k", "", 0.9},
        {"reranker_enabled", "true", "retriever", "fusion", -0.3},
        {"few_shot_enabled", "true", "flow", "rag", 0.5},
        {"few_shot_enabled", "true", "flow", "lats_rag_agent", -0.4},
        {"flow", "lats_rag_agent", "llm", "o3-mini", 0.5},
        {"flow", "sub_question_rag", "llm", "gemini-flash", -0.3},
    };
    s.tier_param = "llm";
    s.tier_cost = {{"anthropic-haiku-35", 0.0008}, {"o3-mini", 0.0011}, {"gpt-4o-mini", 0.00015}, {"gemini-flash", 0.0001}};
    s.tier_latency = {{"anthropic-haiku-35", 1.6}, {"o3-mini", 4.0}, {"gpt-4o-mini", 1.2}, {"gemini-flash", 0.9}};
    s.multipliers = {
        {"flow", {{"sub_question_rag", 2.2}, {"lats_rag_agent", 3.0}}},
        {"retriever", {{"sparse", 0.9}, {"fusion", 1.4}}},
        {"reranker_llm", {{"anthropic-haiku-35", 1.9}, {"o3-mini", 2.2}, {"gpt-4o-mini", 1.2}, {"gemini-flash", 1.1}}},
        {"hyde_llm", {{"anthropic-haiku-35", 1.8}, {"o3-mini", 2.0}, {"gpt-4o-mini", 1.15}, {"gemini-flash", 1.1}}},
        {"few_shot_enabled", {{"true", 1.2}}},
        {"sub_question_llm", {{"anthropic-haiku-35", 1.5}, {"o3-mini", 1.7}, {"gpt-4o-mini", 1.1}, {"gemini-flash", 1.05}}},
    };
    s.cost_factors = {{"top_k", 1.0}, {"few_shot_top_k", 0.3}, {"lats_max_steps", 1.2}};
    s.cost_sigma = 0.3;
    s.latency_sigma = 0.2;
    s.error_rate = {{"gemini-flash", 0.01}};
    return s;
}

inline SimBenchmarkSpec builtin_benchmark(const std::string& name) {
    if (name == "desk-1") return desk1();
    if (name == "desk-2") return desk2();
    throw ConfigError("unknown builtin benchmark '" + name + "'");
}

inline SearchSpace builtin_space(const std::string& name) {
    if (name == "default") return default_space();
    if (name == "desk-1") return desk1_space();
    if (name == "desk-2") return desk2_space();
    throw ConfigError("unknown builtin space '" + name + "'");
}

} // namespace flowsearch
