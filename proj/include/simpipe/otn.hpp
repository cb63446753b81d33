#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "simpipe/mobility.hpp"
#include "simpipe/pcap.hpp"
#include "simpipe/traffic5g.hpp"

namespace simpipe::otn {

using NodeId = std::uint16_t;
using LinkId = std::uint32_t;

/// Light in fibre covers one kilometre in about five microseconds.
inline constexpr double propagation_us_per_km = 5.0;
inline constexpr std::size_t default_disjoint_paths = 2;
inline constexpr double token_bucket_burst_packets = 10.0;

enum class NodeKind { switch_node, amplifier, receiver };

const char* to_string(NodeKind kind) noexcept;

struct Node {
    NodeId id = 0;
    NodeKind kind = NodeKind::switch_node;
    double processing_delay_us = 0.0;
    /// Geographic placement; used to attach users to the nearest ingress.
    mobility::Position position;
};

struct Link {
    LinkId id = 0;
    NodeId a = 0;
    NodeId b = 0;
    double length_km = 0.0;
    int wavelength_count = 1;
    double wavelength_capacity_bps = 0.0;
    double bit_error_rate = 0.0;

    NodeId other(NodeId n) const noexcept { return n == a ? b : a; }
};

class OtnTopology {
public:
    std::vector<Node> nodes;
    std::vector<Link> links;
    std::vector<NodeId> ingress_set;
    std::vector<NodeId> egress_set;

    /// Unique ids, amplifier degree 2, receivers at every egress, BER < 1,
    /// and every node reachable without transiting a receiver.
    void validate() const;

    const Node& node(NodeId id) const;
    const Link& link(LinkId id) const;
    bool has_node(NodeId id) const noexcept;
    std::vector<LinkId> incident(NodeId id) const;

    traffic::AttachmentPoints attachment_points() const;
};

/// Line-oriented topology description; see docs in README.
OtnTopology parse_topology(const std::string& text);
OtnTopology build_topology(const std::filesystem::path& path);

struct Path {
    std::vector<LinkId> links;
    std::vector<NodeId> nodes;
    double length_km = 0.0;

    bool operator==(const Path&) const = default;
};

struct DisjointPathSet {
    NodeId src = 0;
    NodeId dst = 0;
    std::vector<Path> paths;
    std::size_t requested = 0;

    bool shortfall() const noexcept { return paths.size() < requested; }
    /// Throws invariant_error if two paths share a link.
    void check_disjoint() const;
};

/// Up to k pairwise link-disjoint paths of minimum combined length
/// (successive shortest paths on the residual graph, Suurballe/Bhandari
/// style), ordered by length. Receivers are never transited.
DisjointPathSet compute_disjoint_paths(const OtnTopology& topology, NodeId src, NodeId dst,
                                       std::size_t k = default_disjoint_paths);

using PathSetMap = std::map<std::pair<NodeId, NodeId>, DisjointPathSet>;

struct Flow {
    std::uint64_t flow_id = 0;
    NodeId src = 0;
    NodeId dst = 0;
    double mean_rate_bps = 0.0;
    /// Mean captured packet size; sets the policing burst.
    double mean_packet_bytes = 0.0;
};

struct GroomedChannel {
    std::uint64_t channel_id = 0;
    NodeId src = 0;
    NodeId dst = 0;
    int wavelength = 0;
    std::size_t path_index = 0;
    double committed_rate_bps = 0.0;
    /// Smallest wavelength capacity along the path.
    double capacity_bps = 0.0;
    double burst_bytes = 0.0;
    std::vector<std::uint64_t> members;

    bool operator==(const GroomedChannel&) const = default;
};

struct GroomResult {
    std::vector<GroomedChannel> channels;
    std::vector<std::uint64_t> unroutable;
};

/// First-fit grooming in flow-id order. A flow joins the first channel of its
/// (src, dst) with spare committed capacity; otherwise a channel opens on the
/// least-loaded path of the set at the lowest wavelength free on every link
/// of that path.
GroomResult groom(std::span<const Flow> flows, const OtnTopology& topology, const PathSetMap& path_sets);

enum class DropCause { capacity, corruption };

const char* to_string(DropCause cause) noexcept;

struct TransportRecord {
    std::uint64_t user_id = 0;
    std::uint64_t sequence = 0;
    std::uint64_t ingress_us = 0;
    std::optional<std::uint64_t> egress_us;
    std::optional<DropCause> cause;

    bool operator==(const TransportRecord&) const = default;
};

struct IngressFlow {
    std::uint64_t flow_id = 0;
    traffic::FlowKey key;
    pcap::PcapStream stream;
};

struct TransportResult {
    /// Ordered by (ingress time, user, sequence).
    std::vector<TransportRecord> records;
    std::map<std::uint64_t, pcap::PcapStream> egress;
    /// The same records split by flow id, each in record order.
    std::map<std::uint64_t, std::vector<TransportRecord>> by_flow;
};

/// One-way latency of a path: propagation plus processing at every node.
double path_latency_us(const OtnTopology& topology, const Path& path);

/// Probability that a packet of `bytes` is corrupted on one link.
double corruption_probability(double bit_error_rate, std::size_t bytes);

/// Simulates the channels whose index satisfies `include_channel` (all when
/// empty). Flows listed as unroutable lose every packet to capacity.
TransportResult simulate_transport(std::span<const IngressFlow> flows, const GroomResult& grooming,
                                   const OtnTopology& topology, const PathSetMap& path_sets, std::uint64_t seed,
                                   const std::function<bool(std::uint64_t)>& include_channel = {});

/// Per sequence number: the ingress record, then the egress record if it
/// was delivered. Output is time-sorted.
pcap::PcapStream truncate_stream(const pcap::PcapStream& ingress, const pcap::PcapStream& egress);

/// Sidecar `u{user}_s{src}_d{dst}.transport.tsv` carrying drop causes.
std::string transport_sidecar_name(const traffic::FlowKey& key);
void write_transport_records(std::span<const TransportRecord> records, const std::filesystem::path& path);
std::vector<TransportRecord> read_transport_records(const std::filesystem::path& path);

} // namespace simpipe::otn
