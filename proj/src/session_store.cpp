#include "relgraph/error.hpp"
#include "relgraph/session.hpp"

#include <fstream>
#include <iostream>
#include <random>

namespace relgraph {

namespace fs = std::filesystem;

namespace {

std::string fresh_id() {
    static std::mutex mu;
    static std::mt19937_64 rng{std::random_device{}()};
    std::lock_guard lock(mu);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
    return buf;
}

} // namespace

SessionStore::SessionStore(fs::path data_dir, std::size_t snapshot_every)
    : dir_(std::move(data_dir)), snapshot_every_(snapshot_every == 0 ? 100 : snapshot_every) {
    fs::create_directories(dir_);
}

std::shared_ptr<SessionState> SessionStore::restore(const fs::path& log) const {
    std::ifstream in(log);
    if (!in) throw NotFound("cannot open " + log.string());
    std::vector<Json> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            lines.push_back(Json::parse(line));
        } catch (const nlohmann::json::parse_error&) {
            // a torn final write; everything before it is intact
            std::cerr << "{\"warn\":\"skipping unreadable log line\",\"file\":" << Json(log.string()).dump()
                      << "}\n";
            break;
        }
    }
    std::size_t start = 0;
    auto state = std::make_shared<SessionState>();
    for (std::size_t i = lines.size(); i-- > 0;) {
        if (lines[i].contains("snapshot")) {
            *state = state_from_snapshot(lines[i]["snapshot"]);
            start = i + 1;
            break;
        }
    }
    for (std::size_t i = start; i < lines.size(); ++i) {
        if (!lines[i].contains("event")) continue;
        const auto rev = lines[i].value("rev", std::uint64_t{0});
        if (rev <= state->revision) continue;
        apply_event(*state, lines[i]["event"]);
        if (state->revision != rev) {
            throw Error("corrupt_log", "revision mismatch replaying " + log.string());
        }
    }
    if (state->id.empty()) throw Error("corrupt_log", "no create event in " + log.string());
    return state;
}

std::size_t SessionStore::load_all() {
    std::size_t n = 0;
    for (const auto& entry : fs::directory_iterator(dir_)) {
        const fs::path log = entry.path() / "events.jsonl";
        if (!entry.is_directory() || !fs::exists(log)) continue;
        try {
            auto state = restore(log);
            auto s = std::make_shared<Slot>();
            const std::string id = state->id;
            s->state = std::move(state);
            std::unique_lock lock(mu_);
            slots_[id] = std::move(s);
            ++n;
        } catch (const std::exception& e) {
            std::cerr << "{\"warn\":\"session not restored\",\"path\":" << Json(log.string()).dump()
                      << ",\"error\":" << Json(e.what()).dump() << "}\n";
        }
    }
    return n;
}

void SessionStore::append(const std::string& id, const Json& line) const {
    const fs::path dir = dir_ / id;
    fs::create_directories(dir);
    std::ofstream out(dir / "events.jsonl", std::ios::app);
    out << line.dump() << '\n';
    out.flush();
    if (!out) throw Error("io", "cannot append to the event log of " + id);
}

std::string SessionStore::create(Document doc, const std::string& kb_text) {
    std::string id;
    {
        std::shared_lock lock(mu_);
        do {
            id = fresh_id();
        } while (slots_.contains(id));
    }
    if (doc.id.empty()) doc.id = id;
    const Json event{{"type", "create"},
                     {"id", id},
                     {"doc", {{"id", doc.id}, {"title", doc.title}, {"text", doc.text}}},
                     {"kb_text", kb_text}};
    auto state = std::make_shared<SessionState>();
    apply_event(*state, event);
    append(id, Json{{"rev", state->revision}, {"event", event}});
    auto s = std::make_shared<Slot>();
    s->state = std::move(state);
    std::unique_lock lock(mu_);
    slots_[id] = std::move(s);
    return id;
}

std::shared_ptr<SessionStore::Slot> SessionStore::slot(const std::string& id) const {
    std::shared_lock lock(mu_);
    const auto it = slots_.find(id);
    if (it == slots_.end()) throw NotFound("unknown session '" + id + "'");
    return it->second;
}

std::shared_ptr<const SessionState> SessionStore::get(const std::string& id) const {
    auto s = slot(id);
    std::lock_guard lock(s->state_mu);
    return s->state;
}

std::vector<std::string> SessionStore::ids() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> out;
    for (const auto& [id, _] : slots_) out.push_back(id);
    return out;
}

SessionStore::Mutation SessionStore::mutate(const std::string& id, const Json& event,
                                            std::optional<std::uint64_t> expected_revision) {
    auto s = slot(id);
    std::lock_guard write(s->write_mu);
    std::shared_ptr<const SessionState> current;
    {
        std::lock_guard lock(s->state_mu);
        current = s->state;
    }
    if (expected_revision && *expected_revision != current->revision) {
        throw Error("stale_revision", "session is at revision " + std::to_string(current->revision) +
                                          ", not " + std::to_string(*expected_revision));
    }
    auto next = std::make_shared<SessionState>(*current);
    Json result = apply_event(*next, event);
    append(id, Json{{"rev", next->revision}, {"event", event}});
    if (next->revision % snapshot_every_ == 0) {
        append(id, Json{{"rev", next->revision}, {"snapshot", snapshot_json(*next)}});
    }
    {
        std::lock_guard lock(s->state_mu);
        s->state = next;
    }
    s->changed.notify_all();
    return {std::move(next), std::move(result)};
}

std::shared_ptr<const SessionState> SessionStore::wait_newer(const std::string& id,
                                                             std::uint64_t after,
                                                             std::chrono::milliseconds timeout) const {
    auto s = slot(id);
    std::unique_lock lock(s->state_mu);
    if (!s->changed.wait_for(lock, timeout, [&] { return s->state->revision > after; })) {
        return nullptr;
    }
    return s->state;
}

void SessionStore::set_progress(const std::string& id, Progress p) {
    auto s = slot(id);
    std::lock_guard lock(s->state_mu);
    s->progress = std::move(p);
}

Progress SessionStore::progress(const std::string& id) const {
    auto s = slot(id);
    std::lock_guard lock(s->state_mu);
    return s->progress;
}

std::shared_ptr<const EvidenceIndex> SessionStore::index(const std::string& id, Embedder& embedder,
                                                         std::size_t chunk_chars,
                                                         std::size_t overlap_chars) {
    auto s = slot(id);
    const auto state = get(id);
    const std::string key = embedder.name() + "/" + std::to_string(embedder.dim()) + "/" +
                            std::to_string(chunk_chars) + "/" + std::to_string(overlap_chars);
    std::lock_guard lock(s->index_mu);
    if (s->index && s->index_key == key) return s->index;

    const fs::path sidecar = dir_ / id / "index.bin";
    const fs::path sidecar_key = dir_ / id / "index.key";
    std::shared_ptr<const EvidenceIndex> idx;
    if (fs::exists(sidecar) && fs::exists(sidecar_key)) {
        std::ifstream k(sidecar_key);
        std::string stored;
        std::getline(k, stored);
        if (stored == key) {
            try {
                idx = std::make_shared<EvidenceIndex>(EvidenceIndex::load(sidecar.string(), state->doc));
            } catch (const Error& e) {
                std::cerr << "{\"warn\":\"index sidecar ignored\",\"error\":" << Json(e.what()).dump()
                          << "}\n";
            }
        }
    }
    if (!idx) {
        idx = std::make_shared<EvidenceIndex>(
            EvidenceIndex::build(state->doc, chunk_chars, overlap_chars, embedder));
        fs::create_directories(dir_ / id);
        idx->save(sidecar.string());
        std::ofstream(sidecar_key) << key << '\n';
    }
    s->index = idx;
    s->index_key = key;
    return idx;
}

} // namespace relgraph
