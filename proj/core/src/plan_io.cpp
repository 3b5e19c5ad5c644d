#include "nmpsim/plan_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace nmpsim {

using nlohmann::ordered_json;

namespace {

ordered_json spread_to_json(const WeightSpread& s) {
    ordered_json arr = ordered_json::array();
    for (const auto& [tier, bytes] : s.tier_bytes) arr.push_back({{"tier", tier}, {"bytes", bytes}});
    return arr;
}

WeightSpread spread_from_json(const ordered_json& j) {
    WeightSpread s;
    for (const auto& item : j)
        s.tier_bytes.emplace_back(item.at("tier").get<int>(), item.at("bytes").get<std::int64_t>());
    return s;
}

}  // namespace

std::string plan_to_json(const MappingPlan& plan) {
    ordered_json j;
    j["policy"] = to_string(plan.placement.policy);

    // Placement is stored sparsely: kernels on the RRAM NMP.
    ordered_json rram_ids = ordered_json::array();
    for (std::size_t id = 0; id < plan.placement.chiplet_of.size(); ++id)
        if (plan.placement.chiplet_of[id] == Chiplet::RramNmp) rram_ids.push_back(id);
    j["kernel_count"] = plan.placement.chiplet_of.size();
    j["rram_kernels"] = std::move(rram_ids);

    ordered_json edges = ordered_json::array();
    for (const TransferEdge& e : plan.placement.transfer_edges)
        edges.push_back({{"producer", e.producer},
                         {"consumer", e.consumer},
                         {"bytes", e.bytes},
                         {"point", e.point == TransferPoint::AttnOut ? "attn_out" : "ffn_out"},
                         {"phase", to_string(e.phase)},
                         {"decode_step", e.decode_step},
                         {"layer", e.layer_index}});
    j["transfer_edges"] = std::move(edges);

    ordered_json groups = ordered_json::array();
    for (const FusionGroup& g : plan.fusion_groups)
        groups.push_back({{"kind", to_string(g.kind)},
                          {"members", g.members},
                          {"chiplet", to_string(g.chiplet)},
                          {"local_bytes", g.intermediate_bytes_kept_local}});
    j["fusion_groups"] = std::move(groups);

    ordered_json blocks = ordered_json::array();
    for (const KvBlock& b : plan.kv_assignment)
        blocks.push_back({{"id", b.id},
                          {"layer", b.layer_index},
                          {"token_start", b.token_start},
                          {"token_end", b.token_end},
                          {"bytes", b.bytes},
                          {"hotness", b.hotness},
                          {"tier", b.residence_tier},
                          {"on_rram", b.on_rram},
                          {"write_count", b.write_count}});
    j["kv_assignment"] = std::move(blocks);

    j["weights"] = {{"attn", spread_to_json(plan.weights.attn)},
                    {"lm_head", spread_to_json(plan.weights.lm_head)},
                    {"ffn", spread_to_json(plan.weights.ffn)},
                    {"encoder", spread_to_json(plan.weights.encoder)},
                    {"connector", spread_to_json(plan.weights.connector)},
                    {"dram_tier_used_bytes", plan.weights.dram_tier_used_bytes},
                    {"rram_ffn_bytes", plan.weights.rram_ffn_bytes}};
    j["expected_link_bytes_per_decode_step"] = plan.expected_link_bytes_per_decode_step;
    return j.dump() + "\n";
}

MappingPlan plan_from_json_text(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("plan parse error: ") + e.what());
    }
    MappingPlan plan;
    const std::string policy = j.at("policy").get<std::string>();
    plan.placement.policy =
        policy == "dram-only" ? PlacementPolicy::DramOnly : PlacementPolicy::Heterogeneous;
    const std::size_t n = j.at("kernel_count").get<std::size_t>();
    plan.placement.chiplet_of.assign(n, Chiplet::DramNmp);
    for (const auto& id : j.at("rram_kernels")) {
        const std::size_t k = id.get<std::size_t>();
        if (k >= n) throw ConfigError("plan: rram kernel id out of range");
        plan.placement.chiplet_of[k] = Chiplet::RramNmp;
    }
    for (const auto& e : j.at("transfer_edges")) {
        TransferEdge edge;
        edge.producer = e.at("producer").get<std::uint32_t>();
        edge.consumer = e.at("consumer").get<std::uint32_t>();
        edge.bytes = e.at("bytes").get<std::int64_t>();
        edge.point = e.at("point").get<std::string>() == "attn_out" ? TransferPoint::AttnOut
                                                                    : TransferPoint::FfnOut;
        const std::string phase = e.at("phase").get<std::string>();
        edge.phase = phase == "encode"    ? Phase::Encode
                     : phase == "connect" ? Phase::Connect
                     : phase == "prefill" ? Phase::Prefill
                                          : Phase::DecodeStep;
        edge.decode_step = e.at("decode_step").get<int>();
        edge.layer_index = e.at("layer").get<int>();
        plan.placement.transfer_edges.push_back(edge);
    }
    plan.group_of_node.assign(n, kUngrouped);
    for (const auto& g : j.at("fusion_groups")) {
        FusionGroup group;
        group.id = static_cast<std::uint32_t>(plan.fusion_groups.size());
        const std::string kind = g.at("kind").get<std::string>();
        if (kind == "fused_qkv_proj") group.kind = FusionKind::FusedQkvProj;
        else if (kind == "fused_attn_stream") group.kind = FusionKind::FusedAttnStream;
        else if (kind == "fused_ffn_act") group.kind = FusionKind::FusedFfnAct;
        else if (kind == "fused_norm") group.kind = FusionKind::FusedNorm;
        else throw ConfigError("plan: unknown fusion kind '" + kind + "'");
        group.members = g.at("members").get<std::vector<std::uint32_t>>();
        group.chiplet =
            g.at("chiplet").get<std::string>() == "rram" ? Chiplet::RramNmp : Chiplet::DramNmp;
        group.intermediate_bytes_kept_local = g.at("local_bytes").get<std::int64_t>();
        for (std::uint32_t m : group.members) {
            if (m >= n) throw ConfigError("plan: fusion member out of range");
            plan.group_of_node[m] = group.id;
        }
        plan.fusion_groups.push_back(std::move(group));
    }
    for (const auto& b : j.at("kv_assignment")) {
        KvBlock blk;
        blk.id = b.at("id").get<std::uint32_t>();
        blk.layer_index = b.at("layer").get<int>();
        blk.token_start = b.at("token_start").get<std::int64_t>();
        blk.token_end = b.at("token_end").get<std::int64_t>();
        blk.bytes = b.at("bytes").get<std::int64_t>();
        blk.hotness = b.at("hotness").get<double>();
        blk.residence_tier = b.at("tier").get<int>();
        blk.on_rram = b.at("on_rram").get<bool>();
        blk.write_count = b.at("write_count").get<int>();
        plan.kv_assignment.push_back(blk);
    }
    const auto& w = j.at("weights");
    plan.weights.attn = spread_from_json(w.at("attn"));
    plan.weights.lm_head = spread_from_json(w.at("lm_head"));
    plan.weights.ffn = spread_from_json(w.at("ffn"));
    plan.weights.encoder = spread_from_json(w.at("encoder"));
    plan.weights.connector = spread_from_json(w.at("connector"));
    plan.weights.dram_tier_used_bytes =
        w.at("dram_tier_used_bytes").get<std::vector<std::int64_t>>();
    plan.weights.rram_ffn_bytes = w.at("rram_ffn_bytes").get<std::int64_t>();
    plan.expected_link_bytes_per_decode_step =
        j.at("expected_link_bytes_per_decode_step").get<std::int64_t>();
    return plan;
}

MappingPlan load_plan(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError("cannot open plan file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return plan_from_json_text(ss.str());
}

}  // namespace nmpsim
