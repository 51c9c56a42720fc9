#include "autoskill/context_dag.hpp"

#include <algorithm>
#include <unordered_set>

#include "autoskill/errors.hpp"

namespace autoskill {

std::size_t TurnPayload::byte_length() const {
    std::size_t n = text.size();
    for (const auto& call : tool_calls) n += call.name.size() + call.arguments.size();
    for (const auto& obs : observations) n += obs.size();
    return n;
}

bool TurnPayload::operator==(const TurnPayload& other) const {
    if (text != other.text) return false;
    if (tool_calls.size() != other.tool_calls.size()) return false;
    for (size_t i = 0; i < tool_calls.size(); ++i) {
        if (tool_calls[i].name != other.tool_calls[i].name ||
            tool_calls[i].arguments != other.tool_calls[i].arguments)
            return false;
    }
    if (observations != other.observations) return false;
    return usage.fresh_in == other.usage.fresh_in && usage.cached_in == other.usage.cached_in &&
           usage.output == other.usage.output;
}

ojson TurnPayload::to_json() const {
    ojson j;
    j["text"] = text;
    j["tool_calls"] = ojson::array();
    for (const auto& call : tool_calls)
        j["tool_calls"].push_back({{"name", call.name}, {"arguments", call.arguments}});
    j["observations"] = observations;
    j["usage"] = {{"fresh_in", usage.fresh_in}, {"cached_in", usage.cached_in},
                  {"output", usage.output}};
    return j;
}

TurnPayload TurnPayload::from_json(const ojson& j) {
    TurnPayload p;
    p.text = j.value("text", "");
    for (const auto& call : j.value("tool_calls", ojson::array()))
        p.tool_calls.push_back({call.value("name", ""), call.value("arguments", "")});
    for (const auto& obs : j.value("observations", ojson::array()))
        p.observations.push_back(obs.get<std::string>());
    if (j.contains("usage")) {
        p.usage.fresh_in = j["usage"].value("fresh_in", 0L);
        p.usage.cached_in = j["usage"].value("cached_in", 0L);
        p.usage.output = j["usage"].value("output", 0L);
    }
    return p;
}

void CompressionBudget::validate() const {
    if (compress_token_threshold == 0 || node_compress_token_threshold == 0 ||
        keep_first_turns <= 0 || keep_last_turns <= 0)
        throw Error(ErrorCode::usage_error, "compression budget fields must be positive");
    if (keep_first_turns + keep_last_turns < 2)
        throw Error(ErrorCode::usage_error, "keep_first + keep_last must be at least 2");
}

std::size_t default_token_estimate(const TurnPayload& payload) {
    return (payload.byte_length() + 3) / 4;  // ceil(bytes / 4)
}

const char* to_string(CompressionOutcome outcome) {
    switch (outcome) {
        case CompressionOutcome::untouched: return "untouched";
        case CompressionOutcome::level1: return "level1";
        case CompressionOutcome::level2: return "level2";
        case CompressionOutcome::chain_too_short: return "chain_too_short";
    }
    return "unknown";
}

AgentContext::AgentContext(CompressionBudget budget, IdSource ids)
    : budget_(budget), ids_(std::move(ids)), estimator_(default_token_estimate) {
    budget_.validate();
}

const ConversationNode* AgentContext::find(const NodeId& id) const {
    auto it = nodes_.find(id);
    return it == nodes_.end() ? nullptr : it->second.get();
}

ConversationNode* AgentContext::mutable_find(const NodeId& id) {
    auto it = nodes_.find(id);
    return it == nodes_.end() ? nullptr : it->second.get();
}

NodeId AgentContext::append_turn(TurnPayload payload) {
    auto node = std::make_unique<ConversationNode>();
    node->node_id = ids_();
    node->input = std::move(payload);

    if (nodes_.empty()) {
        root_ = node->node_id;
    } else {
        node->parent_id = tip_;
        node->history_prev = last_history_;
        mutable_find(last_history_)->history_next = node->node_id;
    }
    tip_ = node->node_id;
    last_history_ = node->node_id;
    ++history_count_;
    creation_order_.push_back(node->node_id);
    NodeId id = node->node_id;
    nodes_[id] = std::move(node);
    return id;
}

std::vector<const ConversationNode*> AgentContext::active_chain() const {
    std::vector<const ConversationNode*> reversed;
    if (nodes_.empty()) return reversed;

    std::unordered_set<NodeId> seen;
    NodeId cursor = tip_;
    while (true) {
        if (seen.count(cursor))
            throw Error(ErrorCode::cycle_detected, "active chain revisits node " + cursor);
        seen.insert(cursor);
        const ConversationNode* node = find(cursor);
        if (!node)
            throw Error(ErrorCode::cycle_detected, "active chain references missing node " + cursor);
        reversed.push_back(node);
        if (!node->parent_id) break;
        cursor = *node->parent_id;
    }
    if (reversed.back()->node_id != root_)
        throw Error(ErrorCode::cycle_detected, "active chain does not terminate at root");
    std::reverse(reversed.begin(), reversed.end());
    return reversed;
}

std::vector<TurnPayload> AgentContext::replay_full_history() const {
    std::vector<TurnPayload> turns;
    if (nodes_.empty()) return turns;
    NodeId cursor = root_;
    while (true) {
        const ConversationNode* node = find(cursor);
        if (!node)
            throw Error(ErrorCode::broken_history_link, "history references missing node " + cursor);
        turns.push_back(node->input);
        if (!node->history_next) break;
        cursor = *node->history_next;
    }
    return turns;
}

std::size_t AgentContext::estimate(const TurnPayload& payload) const {
    return estimator_(payload);
}

std::size_t AgentContext::total_active_tokens() const {
    std::size_t total = 0;
    for (const ConversationNode* node : active_chain()) total += estimate(node->effective_input());
    return total;
}

CompressionReport AgentContext::maybe_compress_history(const Summarizer& summarize) {
    CompressionReport report;
    if (nodes_.empty()) return report;

    std::vector<const ConversationNode*> chain = active_chain();
    std::size_t total = 0;
    for (const ConversationNode* node : chain) total += estimate(node->effective_input());
    report.tokens_before = total;
    report.tokens_after = total;
    if (total <= budget_.compress_token_threshold) return report;  // under budget; nothing to do

    const std::size_t keep_first = static_cast<std::size_t>(budget_.keep_first_turns);
    const std::size_t keep_last = static_cast<std::size_t>(budget_.keep_last_turns);
    if (chain.size() <= keep_first + keep_last) {
        report.outcome = CompressionOutcome::chain_too_short;
        return report;
    }

    // Level 1: in-place summaries of individually oversized middle nodes,
    // scanned oldest to newest with an early stop once under budget.
    report.level1_attempted = true;
    for (std::size_t i = keep_first; i < chain.size() - keep_last; ++i) {
        if (total <= budget_.compress_token_threshold) break;
        ConversationNode* node = mutable_find(chain[i]->node_id);
        std::size_t before = estimate(node->effective_input());
        if (before <= budget_.node_compress_token_threshold) continue;
        TurnPayload summary;
        summary.text = summarize({node->input});
        node->compressed_input = std::move(summary);
        node->is_node_compressed = true;
        total = total - before + estimate(node->effective_input());
        report.nodes_compressed.push_back(node->node_id);
    }
    report.tokens_after = total;
    if (total <= budget_.compress_token_threshold) {
        report.outcome = CompressionOutcome::level1;  // Level 1 was enough
        return report;
    }

    // Level 2: collapse the middle span into one synthetic summary node and
    // rewire the chain around it. Original nodes keep their history links;
    // a superseded summary node inside the span simply disappears.
    std::vector<TurnPayload> span;
    for (std::size_t i = keep_first; i < chain.size() - keep_last; ++i)
        span.push_back(chain[i]->effective_input());

    auto summary_node = std::make_unique<ConversationNode>();
    summary_node->node_id = ids_();
    summary_node->is_summary = true;
    summary_node->is_node_compressed = true;
    TurnPayload summary_payload;
    summary_payload.text = summarize(span);
    summary_node->compressed_input = std::move(summary_payload);
    summary_node->parent_id = chain[keep_first - 1]->node_id;

    for (std::size_t i = keep_first; i < chain.size() - keep_last; ++i) {
        if (chain[i]->is_summary) {
            NodeId dead = chain[i]->node_id;
            creation_order_.erase(
                std::remove(creation_order_.begin(), creation_order_.end(), dead),
                creation_order_.end());
            nodes_.erase(dead);
        }
    }

    NodeId summary_id = summary_node->node_id;
    mutable_find(chain[chain.size() - keep_last]->node_id)->parent_id = summary_id;  // rewire chain
    creation_order_.push_back(summary_id);
    nodes_[summary_id] = std::move(summary_node);

    report.summary_node = summary_id;
    report.outcome = CompressionOutcome::level2;
    report.tokens_after = total_active_tokens();
    return report;
}

ojson AgentContext::to_json() const {
    ojson j;
    j["root"] = nodes_.empty() ? ojson(nullptr) : ojson(root_);
    j["tip"] = nodes_.empty() ? ojson(nullptr) : ojson(tip_);
    j["nodes"] = ojson::array();
    for (const NodeId& id : creation_order_) {
        const ConversationNode* node = find(id);
        ojson n;
        n["node_id"] = node->node_id;
        n["input"] = node->input.to_json();
        n["compressed_input"] =
            node->compressed_input ? node->compressed_input->to_json() : ojson(nullptr);
        n["is_node_compressed"] = node->is_node_compressed;
        n["is_summary"] = node->is_summary;
        n["parent_id"] = node->parent_id ? ojson(*node->parent_id) : ojson(nullptr);
        n["history_prev"] = node->history_prev ? ojson(*node->history_prev) : ojson(nullptr);
        n["history_next"] = node->history_next ? ojson(*node->history_next) : ojson(nullptr);
        j["nodes"].push_back(std::move(n));
    }
    return j;
}

AgentContext AgentContext::from_json(const ojson& j, CompressionBudget budget, IdSource ids) {
    AgentContext ctx(budget, std::move(ids));
    if (!j.contains("nodes") || !j["nodes"].is_array())
        throw Error(ErrorCode::snapshot_corrupt, "context state has no nodes array");

    for (const auto& n : j["nodes"]) {
        auto node = std::make_unique<ConversationNode>();
        node->node_id = n.value("node_id", "");
        if (node->node_id.empty())
            throw Error(ErrorCode::snapshot_corrupt, "node without node_id");
        node->input = TurnPayload::from_json(n.value("input", ojson::object()));
        if (n.contains("compressed_input") && !n["compressed_input"].is_null())
            node->compressed_input = TurnPayload::from_json(n["compressed_input"]);
        node->is_node_compressed = n.value("is_node_compressed", false);
        node->is_summary = n.value("is_summary", false);
        if (n.contains("parent_id") && !n["parent_id"].is_null())
            node->parent_id = n["parent_id"].get<std::string>();
        if (n.contains("history_prev") && !n["history_prev"].is_null())
            node->history_prev = n["history_prev"].get<std::string>();
        if (n.contains("history_next") && !n["history_next"].is_null())
            node->history_next = n["history_next"].get<std::string>();
        if (ctx.nodes_.count(node->node_id))
            throw Error(ErrorCode::snapshot_corrupt, "duplicate node id " + node->node_id);
        if (!node->is_summary) ++ctx.history_count_;
        ctx.creation_order_.push_back(node->node_id);
        NodeId id = node->node_id;
        ctx.nodes_[id] = std::move(node);
    }
    if (!ctx.nodes_.empty()) {
        if (!j.contains("root") || j["root"].is_null() || !j.contains("tip") || j["tip"].is_null())
            throw Error(ErrorCode::snapshot_corrupt, "missing root/tip");
        ctx.root_ = j["root"].get<std::string>();
        ctx.tip_ = j["tip"].get<std::string>();
    }
    ctx.validate_loaded();
    return ctx;
}

void AgentContext::validate_loaded() {
    if (nodes_.empty()) return;
    if (!find(root_) || !find(tip_))
        throw Error(ErrorCode::snapshot_corrupt, "root or tip missing from node set");

    try {
        active_chain();
    } catch (const Error&) {
        throw Error(ErrorCode::snapshot_corrupt, "active chain invariant violated");
    }

    // history walk must visit every non-summary node exactly once, in order
    std::size_t visited = 0;
    NodeId cursor = root_;
    NodeId last;
    while (true) {
        const ConversationNode* node = find(cursor);
        if (!node) throw Error(ErrorCode::snapshot_corrupt, "history link to missing node");
        if (node->is_summary)
            throw Error(ErrorCode::snapshot_corrupt, "summary node linked into history");
        ++visited;
        if (visited > nodes_.size())
            throw Error(ErrorCode::snapshot_corrupt, "history walk does not terminate");
        last = cursor;
        if (!node->history_next) break;
        cursor = *node->history_next;
    }
    if (visited != history_count_)
        throw Error(ErrorCode::snapshot_corrupt, "history walk misses nodes");
    last_history_ = last;
    for (const auto& [id, node] : nodes_) {
        if (node->is_summary && (node->history_prev || node->history_next))
            throw Error(ErrorCode::snapshot_corrupt, "summary node carries history pointers");
    }
}

}  // namespace autoskill
