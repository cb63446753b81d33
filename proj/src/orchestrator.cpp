#include "simpipe/orchestrator.hpp"

#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "simpipe/error.hpp"
#include "simpipe/fsutil.hpp"

namespace simpipe::orchestrator {

namespace fs = std::filesystem;

std::size_t read_element_count(const fs::path& trace_path)
{
    std::ifstream in(trace_path);
    if (!in)
        throw io_error("cannot open trace " + trace_path.string());
    // The root start tag sits within the first few hundred bytes.
    std::string head(4096, '\0');
    in.read(head.data(), static_cast<std::streamsize>(head.size()));
    head.resize(static_cast<std::size_t>(in.gcount()));
    auto root = head.find("<fcd-export");
    if (root == std::string::npos)
        throw format_error(trace_path.string() + ": no <fcd-export> root element");
    auto close = head.find('>', root);
    std::string tag = head.substr(root, close == std::string::npos ? std::string::npos : close - root);
    static const std::regex attr(R"(\belement_count\s*=\s*["'](\d+)["'])");
    std::smatch m;
    if (!std::regex_search(tag, m, attr))
        throw format_error(trace_path.string() + ": root element lacks element_count");
    return static_cast<std::size_t>(std::stoull(m[1].str()));
}

const char* to_string(TriggerStatus status) noexcept
{
    switch (status) {
    case TriggerStatus::waiting: return "waiting";
    case TriggerStatus::fired_on_count: return "fired_on_count";
    case TriggerStatus::fired_on_timeout: return "fired_on_timeout";
    }
    return "unknown";
}

TriggerStatus trigger_status_from_string(const std::string& name)
{
    for (auto s : {TriggerStatus::waiting, TriggerStatus::fired_on_count, TriggerStatus::fired_on_timeout})
        if (name == to_string(s))
            return s;
    throw format_error("unknown trigger status '" + name + "'");
}

TriggerState make_trigger(fs::path dir, std::size_t expected, std::chrono::milliseconds timeout, std::string pattern)
{
    TriggerState s;
    s.watched_dir = std::move(dir);
    s.pattern = std::move(pattern);
    s.expected = expected;
    s.deadline = TriggerState::clock::now() + timeout;
    return s;
}

namespace {

std::map<std::string, std::uintmax_t> snapshot(const fs::path& dir, const std::regex& pattern)
{
    std::map<std::string, std::uintmax_t> sizes;
    std::error_code ec;
    for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
        auto name = it->path().filename().string();
        if (name.empty() || name.front() == '.' || !std::regex_match(name, pattern))
            continue;
        std::error_code sec;
        if (!it->is_regular_file(sec))
            continue;
        auto size = it->file_size(sec);
        if (!sec)
            sizes[name] = size;
    }
    if (ec)
        throw io_error("cannot list watched directory " + dir.string());
    return sizes;
}

void require_dir(const fs::path& dir)
{
    if (!fs::is_directory(dir))
        throw io_error("watched directory " + dir.string() + " does not exist");
}

} // namespace

TriggerState watch_and_trigger(TriggerState state, std::chrono::milliseconds poll_interval)
{
    using clock = TriggerState::clock;
    if (state.fired())
        return state;
    require_dir(state.watched_dir);
    if (state.expected == 0) {
        state.status = TriggerStatus::fired_on_count;
        state.fired_at = clock::now();
        return state;
    }

    const std::regex pattern(state.pattern);
    auto previous = snapshot(state.watched_dir, pattern);
    for (;;) {
        auto now = clock::now();
        auto wait = std::min<clock::duration>(poll_interval, state.deadline - now);
        if (wait > clock::duration::zero())
            std::this_thread::sleep_for(wait);
        require_dir(state.watched_dir);
        auto current = snapshot(state.watched_dir, pattern);
        std::size_t stable = 0;
        for (const auto& [name, size] : current) {
            auto it = previous.find(name);
            if (it != previous.end() && it->second == size)
                ++stable;
        }
        previous = std::move(current);
        state.observed = stable;
        now = clock::now();
        if (stable >= state.expected) {
            state.status = TriggerStatus::fired_on_count;
            state.fired_at = now;
            return state;
        }
        if (now >= state.deadline) {
            state.status = TriggerStatus::fired_on_timeout;
            state.fired_at = now;
            return state;
        }
    }
}

std::vector<std::vector<std::uint64_t>> partition_work(std::span<const std::uint64_t> user_ids,
                                                       std::int64_t worker_count)
{
    if (worker_count <= 0)
        throw config_error("worker_count must be positive");
    std::vector<std::vector<std::uint64_t>> parts(static_cast<std::size_t>(worker_count));
    for (auto id : user_ids)
        parts[id % static_cast<std::uint64_t>(worker_count)].push_back(id);
    return parts;
}

std::optional<traffic::FlowKey> infer_flow_key(const std::string& filename)
{
    static const std::regex pattern(
        R"((?:^|[^a-z])(?:ue|user|usr|u)[-_ ]?(\d+)[^0-9]*?(?:src|source|s)[-_ ]?(\d+)[^0-9]*?(?:dst|dest|destination|d)[-_ ]?(\d+)(?:[^0-9].*)?\.pcap$)",
        std::regex::icase);
    std::smatch m;
    if (!std::regex_search(filename, m, pattern))
        return std::nullopt;
    try {
        auto src = std::stoul(m[2].str());
        auto dst = std::stoul(m[3].str());
        if (src > 0xffff || dst > 0xffff)
            return std::nullopt;
        return traffic::FlowKey{std::stoull(m[1].str()), static_cast<std::uint16_t>(src),
                                static_cast<std::uint16_t>(dst)};
    } catch (const std::out_of_range&) {
        return std::nullopt;
    }
}

RenameMap read_rename_map(const fs::path& path)
{
    RenameMap map;
    std::istringstream in(fsutil::read_text(path));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line.front() == '#')
            continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
            throw format_error(path.string() + ":" + std::to_string(lineno) + ": expected two tab-separated columns");
        map[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return map;
}

void write_rename_map(const RenameMap& map, const fs::path& path)
{
    std::string out;
    for (const auto& [from, to] : map)
        out += from + '\t' + to + '\n';
    fsutil::atomic_write(path, out);
}

std::size_t rename_batch(const fs::path& dir, const RenameMap& map, const NameInferencer& inferencer)
{
    if (!fs::is_directory(dir))
        throw io_error("not a directory: " + dir.string());

    std::set<std::string> present;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file())
            present.insert(entry.path().filename().string());

    std::vector<std::pair<std::string, std::string>> plan;
    for (const auto& name : present) {
        if (name.front() == '.')
            continue;
        if (auto it = map.find(name); it != map.end()) {
            if (it->second != name)
                plan.emplace_back(name, it->second);
            continue;
        }
        bool is_pcap = name.size() > 5 && name.compare(name.size() - 5, 5, ".pcap") == 0;
        if (!is_pcap || traffic::parse_canonical_name(name))
            continue;
        auto key = inferencer ? inferencer(name) : std::nullopt;
        if (!key)
            throw format_error("cannot infer a canonical name for '" + name + "' and no map entry exists");
        plan.emplace_back(name, traffic::canonical_name(*key));
    }

    std::set<std::string> sources;
    for (const auto& [from, to] : plan)
        sources.insert(from);
    std::map<std::string, std::string> targets;
    for (const auto& [from, to] : plan) {
        if (to.empty() || to.find('/') != std::string::npos)
            throw format_error("invalid rename target '" + to + "' for '" + from + "'");
        auto [it, fresh] = targets.emplace(to, from);
        if (!fresh)
            throw format_error("rename collision: '" + from + "' and '" + it->second + "' both map to '" + to + "'");
        if (present.count(to) && !sources.count(to))
            throw format_error("rename collision: '" + from + "' would overwrite existing '" + to + "'");
    }
    if (plan.empty())
        return 0;

    // Two phases through hidden temporaries so chains (a->b, b->c) are safe.
    std::vector<std::pair<fs::path, fs::path>> staged;
    auto rollback = [&](std::size_t upto_final) {
        std::error_code ec;
        for (std::size_t i = 0; i < upto_final; ++i)
            fs::rename(dir / plan[i].second, staged[i].second, ec);
        for (auto& [orig, tmp] : staged)
            fs::rename(tmp, orig, ec);
    };
    for (std::size_t i = 0; i < plan.size(); ++i) {
        fs::path orig = dir / plan[i].first;
        fs::path tmp = dir / (".rename-" + std::to_string(i) + ".partial");
        std::error_code ec;
        fs::rename(orig, tmp, ec);
        if (ec) {
            rollback(0);
            throw io_error("cannot rename " + orig.string() + ": " + ec.message());
        }
        staged.emplace_back(orig, tmp);
    }
    for (std::size_t i = 0; i < plan.size(); ++i) {
        std::error_code ec;
        fs::rename(staged[i].second, dir / plan[i].second, ec);
        if (ec) {
            rollback(i);
            throw io_error("cannot rename to " + plan[i].second + ": " + ec.message());
        }
    }

    RenameMap applied;
    fs::path map_path = dir / rename_map_name;
    if (fs::exists(map_path))
        applied = read_rename_map(map_path);
    for (const auto& [from, to] : plan)
        applied[from] = to;
    write_rename_map(applied, map_path);
    return plan.size();
}

} // namespace simpipe::orchestrator
