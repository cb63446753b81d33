#include "simpipe/otn.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <set>
#include <sstream>

#include "simpipe/error.hpp"
#include "simpipe/fsutil.hpp"
#include "simpipe/rng.hpp"

namespace simpipe::otn {

namespace {

std::string node_name(NodeId id)
{
    return "node " + std::to_string(id);
}

/// Splits `key=value` tokens; bare tokens are returned positionally.
struct Directive {
    std::string keyword;
    std::vector<std::string> positional;
    std::map<std::string, std::string> fields;
    int line = 0;

    std::string where() const { return "topology line " + std::to_string(line) + ": "; }

    double number(const std::string& key, std::optional<double> fallback = std::nullopt) const
    {
        auto it = fields.find(key);
        if (it == fields.end()) {
            if (fallback)
                return *fallback;
            throw config_error(where() + "missing '" + key + "'");
        }
        try {
            std::size_t used = 0;
            double v = std::stod(it->second, &used);
            if (used != it->second.size())
                throw std::invalid_argument(key);
            return v;
        } catch (const std::logic_error&) {
            throw config_error(where() + "'" + key + "' is not a number");
        }
    }
};

unsigned long parse_id(const Directive& d, const std::string& text, unsigned long max)
{
    try {
        std::size_t used = 0;
        unsigned long v = std::stoul(text, &used);
        if (used != text.size() || v > max)
            throw std::out_of_range(text);
        return v;
    } catch (const std::logic_error&) {
        throw config_error(d.where() + "'" + text + "' is not a valid id");
    }
}

NodeId parse_node_id(const Directive& d, const std::string& text)
{
    return static_cast<NodeId>(parse_id(d, text, std::numeric_limits<NodeId>::max()));
}

} // namespace

const char* to_string(NodeKind kind) noexcept
{
    switch (kind) {
    case NodeKind::switch_node: return "switch";
    case NodeKind::amplifier: return "amplifier";
    case NodeKind::receiver: return "receiver";
    }
    return "unknown";
}

const char* to_string(DropCause cause) noexcept
{
    return cause == DropCause::capacity ? "capacity" : "corruption";
}

const Node& OtnTopology::node(NodeId id) const
{
    for (const auto& n : nodes)
        if (n.id == id)
            return n;
    throw config_error("unknown " + node_name(id));
}

const Link& OtnTopology::link(LinkId id) const
{
    for (const auto& l : links)
        if (l.id == id)
            return l;
    throw config_error("unknown link " + std::to_string(id));
}

bool OtnTopology::has_node(NodeId id) const noexcept
{
    return std::any_of(nodes.begin(), nodes.end(), [id](const Node& n) { return n.id == id; });
}

std::vector<LinkId> OtnTopology::incident(NodeId id) const
{
    std::vector<LinkId> out;
    for (const auto& l : links)
        if (l.a == id || l.b == id)
            out.push_back(l.id);
    return out;
}

traffic::AttachmentPoints OtnTopology::attachment_points() const
{
    traffic::AttachmentPoints points;
    for (auto id : ingress_set)
        points.ingress.push_back({id, node(id).position});
    points.egress = egress_set;
    return points;
}

void OtnTopology::validate() const
{
    std::set<NodeId> node_ids;
    for (const auto& n : nodes) {
        if (!node_ids.insert(n.id).second)
            throw config_error("duplicate " + node_name(n.id));
        if (n.processing_delay_us < 0.0)
            throw config_error(node_name(n.id) + " has a negative processing delay");
    }
    std::set<LinkId> link_ids;
    for (const auto& l : links) {
        std::string name = "link " + std::to_string(l.id);
        if (!link_ids.insert(l.id).second)
            throw config_error("duplicate " + name);
        if (!node_ids.count(l.a) || !node_ids.count(l.b))
            throw config_error(name + " references an unknown node");
        if (l.a == l.b)
            throw config_error(name + " is a self loop");
        if (!(l.length_km > 0.0))
            throw config_error(name + " must have a positive length");
        if (l.wavelength_count <= 0 || !(l.wavelength_capacity_bps > 0.0))
            throw config_error(name + " needs at least one wavelength with positive capacity");
        if (!(l.bit_error_rate >= 0.0 && l.bit_error_rate < 1.0))
            throw config_error(name + " bit error rate must lie in [0, 1)");
    }
    for (const auto& n : nodes)
        if (n.kind == NodeKind::amplifier && incident(n.id).size() != 2)
            throw config_error("amplifier " + node_name(n.id) + " has degree " + std::to_string(incident(n.id).size()) +
                               ", expected 2");
    for (auto id : egress_set)
        if (!node_ids.count(id) || node(id).kind != NodeKind::receiver)
            throw config_error("egress " + node_name(id) + " is not a receiver");
    for (auto id : ingress_set)
        if (!node_ids.count(id) || node(id).kind != NodeKind::switch_node)
            throw config_error("ingress " + node_name(id) + " is not a switch");

    auto start = std::find_if(nodes.begin(), nodes.end(), [](const Node& n) { return n.kind == NodeKind::switch_node; });
    if (start == nodes.end())
        throw config_error("topology has no switch");
    std::set<NodeId> seen{start->id};
    std::deque<NodeId> queue{start->id};
    while (!queue.empty()) {
        NodeId cur = queue.front();
        queue.pop_front();
        if (cur != start->id && node(cur).kind == NodeKind::receiver)
            continue;
        for (auto lid : incident(cur)) {
            NodeId next = link(lid).other(cur);
            if (seen.insert(next).second)
                queue.push_back(next);
        }
    }
    for (const auto& n : nodes)
        if (!seen.count(n.id))
            throw config_error("disconnected graph: " + node_name(n.id) + " is unreachable");
}

OtnTopology parse_topology(const std::string& text)
{
    OtnTopology topo;
    std::optional<std::pair<std::size_t, std::size_t>> declared;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        if (auto hash = raw.find('#'); hash != std::string::npos)
            raw.erase(hash);
        std::istringstream tokens(raw);
        Directive d;
        d.line = lineno;
        if (!(tokens >> d.keyword))
            continue;
        for (std::string tok; tokens >> tok;) {
            if (auto eq = tok.find('='); eq != std::string::npos)
                d.fields[tok.substr(0, eq)] = tok.substr(eq + 1);
            else
                d.positional.push_back(tok);
        }

        if (d.keyword == "node") {
            if (d.positional.size() != 1)
                throw config_error(d.where() + "expected 'node <id> kind=... '");
            Node n;
            n.id = parse_node_id(d, d.positional[0]);
            auto kind = d.fields.count("kind") ? d.fields.at("kind") : std::string{};
            if (kind == "switch")
                n.kind = NodeKind::switch_node;
            else if (kind == "amplifier")
                n.kind = NodeKind::amplifier;
            else if (kind == "receiver")
                n.kind = NodeKind::receiver;
            else
                throw config_error(d.where() + "unknown node kind '" + kind + "'");
            n.processing_delay_us = d.number("delay_us", 0.0);
            n.position = {d.number("x", 0.0), d.number("y", 0.0)};
            topo.nodes.push_back(n);
        } else if (d.keyword == "link") {
            if (d.positional.size() != 1)
                throw config_error(d.where() + "expected 'link <id> a=... b=...'");
            Link l;
            l.id = static_cast<LinkId>(parse_id(d, d.positional[0], std::numeric_limits<LinkId>::max()));
            if (!d.fields.count("a") || !d.fields.count("b"))
                throw config_error(d.where() + "link needs endpoints a= and b=");
            l.a = parse_node_id(d, d.fields.at("a"));
            l.b = parse_node_id(d, d.fields.at("b"));
            l.length_km = d.number("length_km");
            l.wavelength_count = static_cast<int>(d.number("wavelengths", 8));
            l.wavelength_capacity_bps = d.number("capacity_bps", 10e9);
            l.bit_error_rate = d.number("ber", 0.0);
            topo.links.push_back(l);
        } else if (d.keyword == "ingress" || d.keyword == "egress") {
            auto& set = d.keyword == "ingress" ? topo.ingress_set : topo.egress_set;
            for (const auto& tok : d.positional)
                set.push_back(parse_node_id(d, tok));
        } else if (d.keyword == "counts") {
            declared.emplace(static_cast<std::size_t>(d.number("nodes")), static_cast<std::size_t>(d.number("links")));
        } else {
            throw config_error(d.where() + "unknown directive '" + d.keyword + "'");
        }
    }
    if (declared && (declared->first != topo.nodes.size() || declared->second != topo.links.size()))
        throw config_error("topology declares " + std::to_string(declared->first) + " nodes and " +
                           std::to_string(declared->second) + " links but defines " +
                           std::to_string(topo.nodes.size()) + " and " + std::to_string(topo.links.size()));
    topo.validate();
    return topo;
}

OtnTopology build_topology(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path))
        throw config_error("no such topology file: " + path.string());
    return parse_topology(fsutil::read_text(path));
}

void DisjointPathSet::check_disjoint() const
{
    std::set<LinkId> used;
    for (const auto& p : paths)
        for (auto l : p.links)
            if (!used.insert(l).second)
                throw invariant_error("link " + std::to_string(l) + " shared by two paths between " +
                                      std::to_string(src) + " and " + std::to_string(dst));
}

DisjointPathSet compute_disjoint_paths(const OtnTopology& topology, NodeId src, NodeId dst, std::size_t k)
{
    if (src == dst)
        throw config_error("degenerate node pair: source and destination are both " + node_name(src));
    if (!topology.has_node(src) || !topology.has_node(dst))
        throw config_error("path endpoints must be topology nodes");

    // Dense indices for nodes and links.
    std::map<NodeId, std::size_t> index;
    for (std::size_t i = 0; i < topology.nodes.size(); ++i)
        index[topology.nodes[i].id] = i;
    const std::size_t n = topology.nodes.size();
    std::vector<std::vector<std::size_t>> adjacency(n);
    for (std::size_t li = 0; li < topology.links.size(); ++li) {
        adjacency[index[topology.links[li].a]].push_back(li);
        adjacency[index[topology.links[li].b]].push_back(li);
    }
    const std::size_t s = index[src];
    const std::size_t t = index[dst];
    auto transit_allowed = [&](std::size_t v) {
        return v == s || v == t || topology.nodes[v].kind != NodeKind::receiver;
    };

    // Net direction of flow on each link: +1 a->b, -1 b->a, 0 unused.
    std::vector<int> use(topology.links.size(), 0);
    std::size_t found = 0;
    constexpr double inf = std::numeric_limits<double>::infinity();
    while (found < k) {
        std::vector<double> dist(n, inf);
        std::vector<std::size_t> via(n, topology.links.size());
        dist[s] = 0.0;
        // Bellman-Ford: residual arcs of used links carry negative length.
        for (std::size_t round = 0; round + 1 < n || round == 0; ++round) {
            bool changed = false;
            for (std::size_t u = 0; u < n; ++u) {
                if (dist[u] == inf || !transit_allowed(u) || u == t)
                    continue;
                for (auto li : adjacency[u]) {
                    const Link& l = topology.links[li];
                    bool forward = topology.nodes[u].id == l.a;
                    int dir = forward ? 1 : -1;
                    double cost;
                    if (use[li] == 0)
                        cost = l.length_km;
                    else if (use[li] == -dir)
                        cost = -l.length_km;
                    else
                        continue;
                    std::size_t v = index[l.other(topology.nodes[u].id)];
                    if (dist[u] + cost < dist[v] - 1e-12) {
                        dist[v] = dist[u] + cost;
                        via[v] = li;
                        changed = true;
                    }
                }
            }
            if (!changed)
                break;
        }
        if (dist[t] == inf)
            break;
        for (std::size_t v = t; v != s;) {
            std::size_t li = via[v];
            const Link& l = topology.links[li];
            NodeId vid = topology.nodes[v].id;
            NodeId uid = l.other(vid);
            int dir = uid == l.a ? 1 : -1;
            use[li] = use[li] == 0 ? dir : 0;
            v = index[uid];
        }
        ++found;
    }
    if (found == 0)
        throw config_error("no path between " + node_name(src) + " and " + node_name(dst));

    DisjointPathSet set;
    set.src = src;
    set.dst = dst;
    set.requested = k;
    for (std::size_t p = 0; p < found; ++p) {
        Path path;
        path.nodes.push_back(src);
        std::size_t cur = s;
        while (cur != t) {
            std::size_t chosen = topology.links.size();
            for (auto li : adjacency[cur]) {
                const Link& l = topology.links[li];
                int dir = topology.nodes[cur].id == l.a ? 1 : -1;
                if (use[li] == dir && (chosen == topology.links.size() || l.id < topology.links[chosen].id))
                    chosen = li;
            }
            if (chosen == topology.links.size())
                throw invariant_error("flow decomposition failed between " + node_name(src) + " and " +
                                      node_name(dst));
            use[chosen] = 0;
            const Link& l = topology.links[chosen];
            path.links.push_back(l.id);
            path.length_km += l.length_km;
            NodeId next = l.other(topology.nodes[cur].id);
            path.nodes.push_back(next);
            cur = index[next];
        }
        set.paths.push_back(std::move(path));
    }
    std::sort(set.paths.begin(), set.paths.end(), [](const Path& a, const Path& b) {
        if (a.length_km != b.length_km)
            return a.length_km < b.length_km;
        return a.links < b.links;
    });
    set.check_disjoint();
    return set;
}

GroomResult groom(std::span<const Flow> flows, const OtnTopology& topology, const PathSetMap& path_sets)
{
    std::vector<const Flow*> order;
    for (const auto& f : flows)
        order.push_back(&f);
    std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->flow_id < b->flow_id; });

    std::map<LinkId, std::vector<bool>> occupied;
    for (const auto& l : topology.links)
        occupied[l.id].assign(static_cast<std::size_t>(l.wavelength_count), false);

    GroomResult result;
    std::vector<std::vector<const Flow*>> members;
    for (const Flow* f : order) {
        auto ps = path_sets.find({f->src, f->dst});
        if (ps == path_sets.end() || ps->second.paths.empty())
            throw config_error("no disjoint path set for (" + std::to_string(f->src) + ", " +
                               std::to_string(f->dst) + ")");

        bool placed = false;
        for (std::size_t c = 0; c < result.channels.size() && !placed; ++c) {
            auto& ch = result.channels[c];
            if (ch.src == f->src && ch.dst == f->dst && ch.committed_rate_bps + f->mean_rate_bps <= ch.capacity_bps) {
                ch.committed_rate_bps += f->mean_rate_bps;
                ch.members.push_back(f->flow_id);
                members[c].push_back(f);
                placed = true;
            }
        }
        if (placed)
            continue;

        const auto& paths = ps->second.paths;
        std::vector<double> load(paths.size(), 0.0);
        for (const auto& ch : result.channels)
            if (ch.src == f->src && ch.dst == f->dst)
                load[ch.path_index] += ch.committed_rate_bps;
        std::vector<std::size_t> candidates(paths.size());
        for (std::size_t i = 0; i < paths.size(); ++i)
            candidates[i] = i;
        std::stable_sort(candidates.begin(), candidates.end(),
                         [&](std::size_t a, std::size_t b) { return load[a] < load[b]; });

        for (auto pi : candidates) {
            const Path& path = paths[pi];
            double capacity = std::numeric_limits<double>::infinity();
            std::size_t lambdas = std::numeric_limits<std::size_t>::max();
            for (auto lid : path.links) {
                capacity = std::min(capacity, topology.link(lid).wavelength_capacity_bps);
                lambdas = std::min(lambdas, occupied[lid].size());
            }
            if (f->mean_rate_bps > capacity)
                continue;
            for (std::size_t w = 0; w < lambdas; ++w) {
                bool free = std::all_of(path.links.begin(), path.links.end(),
                                        [&](LinkId lid) { return !occupied[lid][w]; });
                if (!free)
                    continue;
                for (auto lid : path.links)
                    occupied[lid][w] = true;
                GroomedChannel ch;
                ch.channel_id = result.channels.size();
                ch.src = f->src;
                ch.dst = f->dst;
                ch.wavelength = static_cast<int>(w);
                ch.path_index = pi;
                ch.committed_rate_bps = f->mean_rate_bps;
                ch.capacity_bps = capacity;
                ch.members.push_back(f->flow_id);
                result.channels.push_back(std::move(ch));
                members.push_back({f});
                placed = true;
                break;
            }
            if (placed)
                break;
        }
        if (!placed)
            result.unroutable.push_back(f->flow_id);
    }

    for (std::size_t c = 0; c < result.channels.size(); ++c) {
        double rate = 0.0;
        double weighted = 0.0;
        for (const Flow* f : members[c]) {
            rate += f->mean_rate_bps;
            weighted += f->mean_rate_bps * f->mean_packet_bytes;
        }
        double mean_bytes = rate > 0.0 ? weighted / rate : 0.0;
        result.channels[c].burst_bytes = token_bucket_burst_packets * mean_bytes;
    }
    return result;
}

double path_latency_us(const OtnTopology& topology, const Path& path)
{
    double us = 0.0;
    for (auto lid : path.links)
        us += topology.link(lid).length_km * propagation_us_per_km;
    for (auto nid : path.nodes)
        us += topology.node(nid).processing_delay_us;
    return us;
}

double corruption_probability(double bit_error_rate, std::size_t bytes)
{
    if (bit_error_rate <= 0.0)
        return 0.0;
    return -std::expm1(8.0 * static_cast<double>(bytes) * std::log1p(-bit_error_rate));
}

TransportResult simulate_transport(std::span<const IngressFlow> flows, const GroomResult& grooming,
                                   const OtnTopology& topology, const PathSetMap& path_sets, std::uint64_t seed,
                                   const std::function<bool(std::uint64_t)>& include_channel)
{
    std::map<std::uint64_t, std::size_t> channel_of;
    for (std::size_t c = 0; c < grooming.channels.size(); ++c)
        for (auto m : grooming.channels[c].members)
            channel_of[m] = c;
    std::set<std::uint64_t> unroutable(grooming.unroutable.begin(), grooming.unroutable.end());

    struct Packet {
        std::uint64_t time_us;
        std::uint64_t user;
        std::uint64_t seq;
        const IngressFlow* flow;
        std::size_t index;
    };
    std::vector<std::vector<Packet>> per_channel(grooming.channels.size());
    TransportResult result;
    std::vector<std::uint64_t> owner;

    for (const auto& flow : flows) {
        auto it = channel_of.find(flow.flow_id);
        bool dropped_all = it == channel_of.end();
        if (dropped_all && !unroutable.count(flow.flow_id))
            throw stage_error("user " + std::to_string(flow.key.user_id) + " has no groomed channel");
        if (!dropped_all && include_channel && !include_channel(it->second))
            continue;
        result.egress[flow.flow_id] = pcap::PcapStream{flow.stream.link_type, flow.stream.snap_len, {}};
        for (std::size_t i = 0; i < flow.stream.records.size(); ++i) {
            const auto& r = flow.stream.records[i];
            auto h = traffic::SyntheticPacketHeader::decode(r.payload);
            if (dropped_all) {
                result.records.push_back({h.user_id, h.sequence, r.micros(), std::nullopt, DropCause::capacity});
                owner.push_back(flow.flow_id);
            }
            else
                per_channel[it->second].push_back({r.micros(), h.user_id, h.sequence, &flow, i});
        }
    }

    for (std::size_t c = 0; c < per_channel.size(); ++c) {
        auto& packets = per_channel[c];
        if (packets.empty())
            continue;
        const auto& ch = grooming.channels[c];
        const Path& path = path_sets.at({ch.src, ch.dst}).paths.at(ch.path_index);
        const double latency_us = path_latency_us(topology, path);
        const auto latency_ticks = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::floor(latency_us + 0.5)));
        std::vector<double> link_ber;
        for (auto lid : path.links)
            link_ber.push_back(topology.link(lid).bit_error_rate);

        std::stable_sort(packets.begin(), packets.end(), [](const Packet& a, const Packet& b) {
            return std::tie(a.time_us, a.user, a.seq) < std::tie(b.time_us, b.user, b.seq);
        });
        const double bytes_per_us = ch.committed_rate_bps / 8.0 / 1e6;
        double tokens = ch.burst_bytes;
        std::uint64_t last = packets.front().time_us;
        for (const auto& pk : packets) {
            const auto& rec = pk.flow->stream.records[pk.index];
            tokens = std::min(ch.burst_bytes, tokens + static_cast<double>(pk.time_us - last) * bytes_per_us);
            last = pk.time_us;
            TransportRecord tr{pk.user, pk.seq, pk.time_us, std::nullopt, std::nullopt};
            const double size = rec.captured_len();
            if (tokens < size) {
                tr.cause = DropCause::capacity;
            } else {
                tokens -= size;
                for (std::size_t li = 0; li < path.links.size(); ++li) {
                    double p = corruption_probability(link_ber[li], rec.captured_len());
                    if (p > 0.0 && hash_uniform(seed, stream_tag::corruption, pk.user, pk.seq, path.links[li]) < p) {
                        tr.cause = DropCause::corruption;
                        break;
                    }
                }
            }
            if (!tr.cause) {
                tr.egress_us = pk.time_us + latency_ticks;
                pcap::PacketRecord out = rec;
                out.set_micros(*tr.egress_us);
                out.payload[25] |= traffic::SyntheticPacketHeader::flag_egress;
                result.egress[pk.flow->flow_id].records.push_back(std::move(out));
            }
            result.records.push_back(tr);
            owner.push_back(pk.flow->flow_id);
        }
    }
    std::vector<std::size_t> order(result.records.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    const auto& recs = result.records;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        const auto& a = recs[x];
        const auto& b = recs[y];
        return std::tie(a.ingress_us, a.user_id, a.sequence) < std::tie(b.ingress_us, b.user_id, b.sequence);
    });
    std::vector<TransportRecord> sorted;
    sorted.reserve(order.size());
    for (auto i : order) {
        sorted.push_back(recs[i]);
        result.by_flow[owner[i]].push_back(recs[i]);
    }
    result.records = std::move(sorted);
    return result;
}

pcap::PcapStream truncate_stream(const pcap::PcapStream& ingress, const pcap::PcapStream& egress)
{
    std::map<std::uint64_t, const pcap::PacketRecord*> delivered;
    for (const auto& r : egress.records) {
        auto seq = traffic::SyntheticPacketHeader::decode(r.payload).sequence;
        delivered.try_emplace(seq, &r);
    }
    std::set<std::uint64_t> known;
    pcap::PcapStream out{ingress.link_type, ingress.snap_len, {}};
    out.records.reserve(ingress.records.size() + egress.records.size());
    for (const auto& r : ingress.records) {
        auto seq = traffic::SyntheticPacketHeader::decode(r.payload).sequence;
        known.insert(seq);
        out.records.push_back(r);
        if (auto it = delivered.find(seq); it != delivered.end())
            out.records.push_back(*it->second);
    }
    for (const auto& [seq, rec] : delivered)
        if (!known.count(seq))
            throw format_error("egress sequence " + std::to_string(seq) + " has no ingress counterpart");
    std::stable_sort(out.records.begin(), out.records.end(),
                     [](const pcap::PacketRecord& a, const pcap::PacketRecord& b) { return a.micros() < b.micros(); });
    return out;
}

std::string transport_sidecar_name(const traffic::FlowKey& key)
{
    return traffic::format_name("u{user}_s{src}_d{dst}.transport.tsv", key);
}

void write_transport_records(std::span<const TransportRecord> records, const std::filesystem::path& path)
{
    std::string out = "user_id\tsequence\tingress_us\tegress_us\tdrop_cause\n";
    for (const auto& r : records) {
        out += std::to_string(r.user_id) + '\t' + std::to_string(r.sequence) + '\t' + std::to_string(r.ingress_us) +
               '\t' + (r.egress_us ? std::to_string(*r.egress_us) : std::string("DROPPED")) + '\t' +
               (r.cause ? to_string(*r.cause) : "-") + '\n';
    }
    fsutil::atomic_write(path, out);
}

std::vector<TransportRecord> read_transport_records(const std::filesystem::path& path)
{
    std::istringstream in(fsutil::read_text(path));
    std::string line;
    std::getline(in, line);
    std::vector<TransportRecord> records;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty())
            continue;
        std::istringstream cols(line);
        TransportRecord r;
        std::string egress, cause;
        if (!(cols >> r.user_id >> r.sequence >> r.ingress_us >> egress >> cause))
            throw format_error(path.string() + ":" + std::to_string(lineno) + ": malformed transport record");
        if (egress != "DROPPED")
            r.egress_us = std::stoull(egress);
        if (cause == "capacity")
            r.cause = DropCause::capacity;
        else if (cause == "corruption")
            r.cause = DropCause::corruption;
        records.push_back(r);
    }
    return records;
}

} // namespace simpipe::otn
