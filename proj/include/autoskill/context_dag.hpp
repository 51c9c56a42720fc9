#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "autoskill/constants.hpp"
#include "autoskill/util.hpp"

namespace autoskill {

struct TokenUsage {
    long fresh_in = 0;
    long cached_in = 0;
    long output = 0;
};

struct ToolCall {
    std::string name;
    std::string arguments;  // JSON text
};

// Everything one turn carries: the model response, its tool calls, the
// observations they produced, and the per-call token usage.
struct TurnPayload {
    std::string text;
    std::vector<ToolCall> tool_calls;
    std::vector<std::string> observations;
    TokenUsage usage;

    std::size_t byte_length() const;
    bool empty() const { return byte_length() == 0; }
    bool operator==(const TurnPayload& other) const;
    ojson to_json() const;
    static TurnPayload from_json(const ojson& j);
};

using NodeId = std::string;

// One conversation turn. `input` is immutable after construction; compression
// only ever writes `compressed_input` and the flag. `parent_id` is the mutable
// active-chain link; `history_prev`/`history_next` are immutable and record
// creation order. Synthetic summary nodes have no history pointers at all.
struct ConversationNode {
    NodeId node_id;
    TurnPayload input;
    std::optional<TurnPayload> compressed_input;
    bool is_node_compressed = false;
    bool is_summary = false;
    std::optional<NodeId> parent_id;      // mutable: active chain
    std::optional<NodeId> history_prev;   // immutable
    std::optional<NodeId> history_next;   // immutable

    const TurnPayload& effective_input() const {
        return is_node_compressed && compressed_input ? *compressed_input : input;
    }
};

struct CompressionBudget {
    std::size_t compress_token_threshold = constants::kCompressTokenThreshold;
    std::size_t node_compress_token_threshold = constants::kNodeCompressTokenThreshold;
    int keep_first_turns = constants::kKeepFirstTurns;
    int keep_last_turns = constants::kKeepLastTurns;

    void validate() const;
};

// Deterministic byte heuristic: ceil(bytes / 4). Swappable for a real
// tokenizer via AgentContext::set_token_estimator.
using TokenEstimator = std::function<std::size_t(const TurnPayload&)>;
std::size_t default_token_estimate(const TurnPayload& payload);

// Summarizes a span of payloads into one compact string. Production binds
// this to the model client; tests use a deterministic stub.
using Summarizer = std::function<std::string(const std::vector<TurnPayload>&)>;

enum class CompressionOutcome { untouched, level1, level2, chain_too_short };
const char* to_string(CompressionOutcome outcome);

struct CompressionReport {
    CompressionOutcome outcome = CompressionOutcome::untouched;
    bool level1_attempted = false;
    std::vector<NodeId> nodes_compressed;  // Level-1 in-place summaries
    std::optional<NodeId> summary_node;    // Level-2 synthetic node
    std::size_t tokens_before = 0;
    std::size_t tokens_after = 0;
};

// The conversation DAG: a mutable active chain reachable from `tip` through
// parent_id, and an immutable full history walked from `root` through
// history_next. The active chain is always a subsequence of the history with
// summary nodes optionally interposed.
class AgentContext {
public:
    explicit AgentContext(CompressionBudget budget = {}, IdSource ids = random_id_source());

    // Appends a new turn at the tip and links it into the history chain.
    NodeId append_turn(TurnPayload payload);

    // Two-level adaptive compression, invoked at the start of a turn. Level-1
    // summarizes individually oversized middle nodes in place; if the chain
    // is still over budget, Level-2 collapses the whole middle span into one
    // synthetic summary node. The first/last pinned turns are never touched.
    CompressionReport maybe_compress_history(const Summarizer& summarize);

    // Active chain, root -> tip. Throws CycleDetected on corruption.
    std::vector<const ConversationNode*> active_chain() const;

    // Original inputs of every real turn, in creation order, regardless of
    // compression state. Throws BrokenHistoryLink on corruption.
    std::vector<TurnPayload> replay_full_history() const;

    std::size_t total_active_tokens() const;
    std::size_t estimate(const TurnPayload& payload) const;

    bool empty() const { return nodes_.empty(); }
    std::size_t turn_count() const { return history_count_; }
    std::size_t node_count() const { return nodes_.size(); }
    const NodeId& root() const { return root_; }
    const NodeId& tip() const { return tip_; }
    const ConversationNode* find(const NodeId& id) const;
    const CompressionBudget& budget() const { return budget_; }

    void set_token_estimator(TokenEstimator estimator) { estimator_ = std::move(estimator); }
    void set_id_source(IdSource ids) { ids_ = std::move(ids); }

    // ctx_state.json node array (schema versioning lives in session_store).
    ojson to_json() const;
    static AgentContext from_json(const ojson& j, CompressionBudget budget = {},
                                  IdSource ids = random_id_source());

private:
    ConversationNode* mutable_find(const NodeId& id);
    void validate_loaded();

    CompressionBudget budget_;
    IdSource ids_;
    TokenEstimator estimator_;
    std::vector<NodeId> creation_order_;  // every node ever added, in order
    std::unordered_map<NodeId, std::unique_ptr<ConversationNode>> nodes_;
    NodeId root_;
    NodeId tip_;
    NodeId last_history_;        // newest non-summary node
    std::size_t history_count_ = 0;
};

}  // namespace autoskill
