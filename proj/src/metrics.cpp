#include "simpipe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "simpipe/dataset.hpp"
#include "simpipe/error.hpp"
#include "simpipe/fsutil.hpp"

namespace simpipe::metrics {

namespace fs = std::filesystem;

namespace {

std::string key_text(const traffic::FlowKey& k)
{
    return "(" + std::to_string(k.user_id) + ", " + std::to_string(k.source) + ", " + std::to_string(k.destination) +
           ")";
}

std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v + 0.0);
    return buf;
}

std::string clean_label(std::string s)
{
    std::replace_if(s.begin(), s.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; }, ' ');
    return s;
}

double parse_num(const std::string& s)
{
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size())
        throw format_error("malformed number '" + s + "' in report");
    return v;
}

std::vector<std::string> split_tabs(const std::string& line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        auto tab = line.find('\t', start);
        out.push_back(line.substr(start, tab - start));
        if (tab == std::string::npos)
            break;
        start = tab + 1;
    }
    return out;
}

} // namespace

Pairing pair_streams(const fs::path& dir)
{
    return pair_streams(dir, dir);
}

Pairing pair_streams(const fs::path& ingress_dir, const fs::path& egress_dir)
{
    std::map<traffic::FlowKey, fs::path> ingress;
    std::map<traffic::FlowKey, fs::path> egress;
    auto scan = [](const fs::path& dir, traffic::CaptureRole want, std::map<traffic::FlowKey, fs::path>& into) {
        if (!fs::is_directory(dir))
            throw io_error("not a directory: " + dir.string());
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (!entry.is_regular_file())
                continue;
            auto parsed = traffic::parse_canonical_name(entry.path().filename().string());
            if (!parsed || parsed->second != want)
                continue;
            auto [it, fresh] = into.emplace(parsed->first, entry.path());
            if (!fresh)
                throw format_error(entry.path().filename().string() + " collides with " +
                                   it->second.filename().string() + " on key " + key_text(parsed->first));
        }
    };
    scan(ingress_dir, traffic::CaptureRole::ingress, ingress);
    scan(egress_dir, traffic::CaptureRole::egress, egress);

    Pairing result;
    for (const auto& [key, path] : ingress) {
        auto it = egress.find(key);
        if (it == egress.end()) {
            result.unmatched.push_back(path);
            continue;
        }
        StreamPair pair{key, path, it->second, std::nullopt};
        auto sidecar = egress_dir / otn::transport_sidecar_name(key);
        if (fs::exists(sidecar))
            pair.sidecar = sidecar;
        result.pairs.push_back(std::move(pair));
        egress.erase(it);
    }
    for (const auto& [key, path] : egress)
        result.unmatched.push_back(path);
    std::sort(result.unmatched.begin(), result.unmatched.end());
    return result;
}

LoadedPair load_pair(const StreamPair& pair)
{
    LoadedPair loaded{pair.key, pcap::read_pcap(pair.ingress), pcap::read_pcap(pair.egress), std::nullopt};
    if (pair.sidecar)
        loaded.transport = otn::read_transport_records(*pair.sidecar);
    return loaded;
}

UserMetrics compute_user_metrics(const LoadedPair& pair)
{
    UserMetrics m;
    m.key = pair.key;
    std::map<std::uint64_t, std::uint64_t> sent;
    for (const auto& r : pair.ingress.records) {
        auto seq = traffic::SyntheticPacketHeader::decode(r.payload).sequence;
        if (!sent.emplace(seq, r.micros()).second)
            throw format_error("duplicate ingress sequence " + std::to_string(seq) + " for " + key_text(pair.key));
    }
    m.packet_count = sent.size();

    std::set<std::uint64_t> received;
    for (const auto& r : pair.egress.records) {
        auto seq = traffic::SyntheticPacketHeader::decode(r.payload).sequence;
        auto it = sent.find(seq);
        if (it == sent.end())
            throw format_error("egress sequence " + std::to_string(seq) + " has no ingress counterpart for " +
                               key_text(pair.key));
        if (!received.insert(seq).second) {
            ++m.duplicates;
            continue;
        }
        m.latency_ms.push_back(static_cast<double>(static_cast<std::int64_t>(r.micros()) -
                                                   static_cast<std::int64_t>(it->second)) /
                               1000.0);
    }
    m.delivered = received.size();
    m.lost = m.packet_count - m.delivered;
    if (m.delivered + m.lost != m.packet_count)
        throw invariant_error("conservation violated for " + key_text(pair.key));
    m.loss_rate = m.packet_count ? static_cast<double>(m.lost) / static_cast<double>(m.packet_count) : 0.0;

    if (pair.transport) {
        std::uint64_t corrupted = 0;
        std::uint64_t dropped = 0;
        std::uint64_t records = 0;
        for (const auto& tr : *pair.transport) {
            if (tr.user_id != pair.key.user_id)
                continue;
            ++records;
            if (!tr.egress_us)
                ++dropped;
            if (tr.cause == otn::DropCause::corruption)
                ++corrupted;
        }
        if (records != m.packet_count || dropped != m.lost)
            throw invariant_error("transport records disagree with captures for " + key_text(pair.key));
        m.error_rate = m.packet_count ? static_cast<double>(corrupted) / static_cast<double>(m.packet_count) : 0.0;
    }

    if (!m.latency_ms.empty()) {
        double sum = 0.0;
        for (double l : m.latency_ms)
            sum += l;
        m.mean_latency_ms = sum / static_cast<double>(m.latency_ms.size());
        std::vector<double> sorted = m.latency_ms;
        std::sort(sorted.begin(), sorted.end());
        auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(sorted.size())));
        m.p95_latency_ms = sorted[std::max<std::size_t>(rank, 1) - 1];
    }
    return m;
}

FeatureVector extract_features(const fs::path& dataset_dir)
{
    auto manifest = traffic::read_manifest(dataset_dir / traffic::dataset_manifest_name);
    FeatureVector f;

    double latency_sum = 0.0;
    double duration_sum = 0.0;
    std::size_t sessions = 0;
    double freq_sum = 0.0;
    const double hours = manifest.trace_duration_s / 3600.0;
    for (const auto& s : manifest.schedules) {
        for (const auto& sess : s.sessions) {
            auto p = manifest.profiles.find(sess.app);
            if (p == manifest.profiles.end())
                throw format_error(std::string("manifest lacks a profile for ") + traffic::to_string(sess.app));
            latency_sum += p->second.latency_req_ms;
            duration_sum += sess.end_s - sess.start_s;
            ++sessions;
        }
        if (hours > 0.0)
            freq_sum += static_cast<double>(s.sessions.size()) / hours;
    }
    if (sessions > 0) {
        f.latency_req_ms_mean = latency_sum / static_cast<double>(sessions);
        f.demand_dur_s_mean = duration_sum / static_cast<double>(sessions);
    }
    if (!manifest.schedules.empty())
        f.demand_freq_per_hour_mean = freq_sum / static_cast<double>(manifest.schedules.size());

    double bytes = 0.0;
    std::uint64_t packets = 0;
    for (const auto& name : manifest.pcaps) {
        auto path = dataset_dir / name;
        if (!fs::exists(path))
            continue;
        for (const auto& r : pcap::read_pcap(path).records) {
            bytes += static_cast<double>(r.captured_len()) - static_cast<double>(traffic::SyntheticPacketHeader::size);
            ++packets;
        }
    }
    if (packets > 0)
        f.packet_avg_size_bytes = bytes / static_cast<double>(packets);
    return f;
}

void ConformityWeights::validate() const
{
    for (double w : values())
        if (!(w > 0.0))
            throw config_error("conformity weights must be positive");
}

double aggregate_conformity(const std::array<double, 4>& similarity, const ConformityWeights& weights)
{
    weights.validate();
    auto w = weights.values();
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        num += w[i] * similarity[i];
        den += w[i];
    }
    return num / den;
}

ConformityReport conformity_score(const FeatureVector& candidate, const FeatureVector& reference,
                                  const ConformityWeights& weights)
{
    auto c = candidate.values();
    auto r = reference.values();
    ConformityReport report;
    report.candidate = candidate;
    report.reference = reference;
    for (std::size_t i = 0; i < 4; ++i) {
        if (!(r[i] > 0.0))
            throw config_error("reference features must be positive");
        if (!(c[i] >= 0.0))
            throw config_error("candidate features must be non-negative");
        report.similarity[i] = 1.0 - std::min(1.0, std::abs(c[i] - r[i]) / r[i]);
    }
    report.aggregate = aggregate_conformity(report.similarity, weights);
    return report;
}

ReportFormat report_format_from_string(const std::string& name)
{
    if (name == "tsv")
        return ReportFormat::tsv;
    if (name == "json-lines" || name == "jsonl")
        return ReportFormat::json_lines;
    throw config_error("unknown report format '" + name + "' (expected tsv or json-lines)");
}

std::string render_report(std::span<const UserMetrics> metrics, const std::optional<ConformityReport>& report,
                          ReportFormat format)
{
    std::vector<const UserMetrics*> rows;
    for (const auto& m : metrics)
        rows.push_back(&m);
    std::stable_sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->key < b->key; });

    std::string out;
    if (format == ReportFormat::tsv) {
        out += "user_id\tsrc\tdst\tpacket_count\tdelivered\tlost\tduplicates\tloss_rate\terror_rate\t"
               "mean_latency_ms\tp95_latency_ms\n";
        for (const auto* m : rows) {
            out += std::to_string(m->key.user_id) + '\t' + std::to_string(m->key.source) + '\t' +
                   std::to_string(m->key.destination) + '\t' + std::to_string(m->packet_count) + '\t' +
                   std::to_string(m->delivered) + '\t' + std::to_string(m->lost) + '\t' +
                   std::to_string(m->duplicates) + '\t' + num(m->loss_rate) + '\t' +
                   (m->error_rate ? num(*m->error_rate) : std::string("NA")) + '\t' + num(m->mean_latency_ms) +
                   '\t' + num(m->p95_latency_ms) + '\n';
        }
        if (!report) {
            out += "#conformity\tNA\n";
            return out;
        }
        auto vec = [](const std::array<double, 4>& v) {
            return num(v[0]) + '\t' + num(v[1]) + '\t' + num(v[2]) + '\t' + num(v[3]);
        };
        out += "#conformity\treference\t" + clean_label(report->reference_label) + '\n';
        out += "#conformity\tcandidate\t" + clean_label(report->candidate_label) + '\n';
        out += "#conformity\treference_features\t" + vec(report->reference.values()) + '\n';
        out += "#conformity\tcandidate_features\t" + vec(report->candidate.values()) + '\n';
        out += "#conformity\tsimilarity\t" + vec(report->similarity) + '\n';
        out += "#conformity\taggregate\t" + num(report->aggregate) + '\n';
        return out;
    }

    auto quoted = [](const std::string& s) { return nlohmann::json(s).dump(); };
    for (const auto* m : rows) {
        out += "{\"user_id\":" + std::to_string(m->key.user_id) + ",\"src\":" + std::to_string(m->key.source) +
               ",\"dst\":" + std::to_string(m->key.destination) + ",\"packet_count\":" +
               std::to_string(m->packet_count) + ",\"delivered\":" + std::to_string(m->delivered) +
               ",\"lost\":" + std::to_string(m->lost) + ",\"duplicates\":" + std::to_string(m->duplicates) +
               ",\"loss_rate\":" + num(m->loss_rate) +
               ",\"error_rate\":" + (m->error_rate ? num(*m->error_rate) : std::string("null")) +
               ",\"mean_latency_ms\":" + num(m->mean_latency_ms) + ",\"p95_latency_ms\":" + num(m->p95_latency_ms) +
               "}\n";
    }
    if (!report) {
        out += "{\"conformity\":null}\n";
        return out;
    }
    auto arr = [](const std::array<double, 4>& v) {
        return "[" + num(v[0]) + "," + num(v[1]) + "," + num(v[2]) + "," + num(v[3]) + "]";
    };
    out += "{\"conformity\":{\"reference\":" + quoted(report->reference_label) +
           ",\"candidate\":" + quoted(report->candidate_label) +
           ",\"reference_features\":" + arr(report->reference.values()) +
           ",\"candidate_features\":" + arr(report->candidate.values()) +
           ",\"similarity\":" + arr(report->similarity) + ",\"aggregate\":" + num(report->aggregate) + "}}\n";
    return out;
}

fs::path export_report(std::span<const UserMetrics> metrics, const std::optional<ConformityReport>& report,
                       const fs::path& path, ReportFormat format)
{
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    fsutil::atomic_write(path, render_report(metrics, report, format));
    return path;
}

ParsedReport parse_tsv_report(const std::string& text)
{
    ParsedReport parsed;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("user_id\t", 0) != 0)
        throw format_error("report lacks its header row");
    ConformityReport conf;
    bool has_conf = false;
    auto vec = [](const std::vector<std::string>& cols) {
        if (cols.size() != 6)
            throw format_error("malformed conformity vector");
        return std::array<double, 4>{parse_num(cols[2]), parse_num(cols[3]), parse_num(cols[4]), parse_num(cols[5])};
    };
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        auto cols = split_tabs(line);
        if (cols[0] == "#conformity") {
            if (cols.size() < 2 || cols[1] == "NA")
                continue;
            has_conf = true;
            if (cols[1] == "reference")
                conf.reference_label = cols.size() > 2 ? cols[2] : "";
            else if (cols[1] == "candidate")
                conf.candidate_label = cols.size() > 2 ? cols[2] : "";
            else if (cols[1] == "reference_features")
                conf.reference = FeatureVector::from_values(vec(cols));
            else if (cols[1] == "candidate_features")
                conf.candidate = FeatureVector::from_values(vec(cols));
            else if (cols[1] == "similarity")
                conf.similarity = vec(cols);
            else if (cols[1] == "aggregate" && cols.size() == 3)
                conf.aggregate = parse_num(cols[2]);
            continue;
        }
        if (cols.size() != 11)
            throw format_error("report row has " + std::to_string(cols.size()) + " columns, expected 11");
        ParsedReport::Row row;
        row.key = {std::stoull(cols[0]), static_cast<std::uint16_t>(std::stoul(cols[1])),
                   static_cast<std::uint16_t>(std::stoul(cols[2]))};
        row.packet_count = std::stoull(cols[3]);
        row.delivered = std::stoull(cols[4]);
        row.lost = std::stoull(cols[5]);
        row.duplicates = std::stoull(cols[6]);
        row.loss_rate = parse_num(cols[7]);
        if (cols[8] != "NA")
            row.error_rate = parse_num(cols[8]);
        row.mean_latency_ms = parse_num(cols[9]);
        row.p95_latency_ms = parse_num(cols[10]);
        parsed.rows.push_back(row);
    }
    if (has_conf)
        parsed.conformity = conf;
    return parsed;
}

} // namespace simpipe::metrics
