#include "gcs/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gcs/errors.hpp"

namespace gcs {

std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::Lkh: return "lkh";
        case Scheme::LkhStrong: return "lkh-strong";
        case Scheme::LkhStrongOpt: return "lkh-strong-opt";
        case Scheme::Cs: return "cs";
        case Scheme::CsStrong: return "cs-strong";
    }
    return "?";
}

std::optional<Scheme> scheme_from_token(const std::string& token) {
    if (token == "lkh") return Scheme::Lkh;
    if (token == "lkh-strong") return Scheme::LkhStrong;
    if (token == "lkh-strong-opt") return Scheme::LkhStrongOpt;
    if (token == "cs") return Scheme::Cs;
    if (token == "cs-strong") return Scheme::CsStrong;
    return std::nullopt;
}

bool scheme_is_stateful(Scheme s) {
    return s == Scheme::Lkh || s == Scheme::LkhStrong || s == Scheme::LkhStrongOpt;
}

namespace {

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

int parse_int(const std::string& tok, int line_no) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError(line_no, "expected a number, got '" + tok + "'");
    }
}

RevocationSet parse_revoked(const std::string& value, int line_no) {
    RevocationSet out;
    std::string item;
    std::istringstream in(value);
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        out.insert(static_cast<std::uint32_t>(parse_int(item, line_no)));
    }
    return out;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
    Scenario sc;
    bool scheme_set = false;
    bool saw_event = false;
    bool saw_setup = false;
    bool has_capture = false;

    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::size_t hash = raw.find('#');
        std::string line = hash == std::string::npos ? raw : raw.substr(0, hash);
        const auto tokens = tokenize(line);
        if (tokens.empty()) continue;
        const std::string& head = tokens.front();

        auto require_scheme = [&]() {
            if (!scheme_set) throw ParseError(line_no, "scheme must be declared first");
        };
        auto config_line = [&]() {
            if (saw_event) throw ParseError(line_no, head + " must precede events");
        };
        auto stateful_only = [&](const char* what) {
            require_scheme();
            if (!sc.stateful())
                throw SchemeMismatch(std::string(what) + " is not valid for scheme " +
                                     to_string(sc.scheme) + " (line " + std::to_string(line_no) +
                                     ")");
        };
        auto stateless_only = [&](const char* what) {
            require_scheme();
            if (sc.stateful())
                throw SchemeMismatch(std::string(what) + " is not valid for scheme " +
                                     to_string(sc.scheme) + " (line " + std::to_string(line_no) +
                                     ")");
        };

        if (head == "scheme") {
            config_line();
            if (tokens.size() != 2) throw ParseError(line_no, "scheme takes one token");
            auto s = scheme_from_token(tokens[1]);
            if (!s) throw ParseError(line_no, "unknown scheme '" + tokens[1] + "'");
            sc.scheme = *s;
            scheme_set = true;
        } else if (head == "degree") {
            config_line();
            if (tokens.size() != 2) throw ParseError(line_no, "degree takes one number");
            sc.degree = parse_int(tokens[1], line_no);
            if (sc.degree < 2) throw ParseError(line_no, "degree must be at least 2");
        } else if (head == "kappa") {
            config_line();
            if (tokens.size() != 2) throw ParseError(line_no, "kappa takes one number");
            sc.kappa = parse_int(tokens[1], line_no);
            if (sc.kappa % 8 != 0 || sc.kappa < 128 || sc.kappa > 512)
                throw ParseError(line_no, "kappa must be a multiple of 8 in [128, 512]");
        } else if (head == "n") {
            config_line();
            if (tokens.size() != 2) throw ParseError(line_no, "n takes one number");
            const int n = parse_int(tokens[1], line_no);
            if (n < 2 || (n & (n - 1)) != 0)
                throw ParseError(line_no, "n must be a power of two, at least 2");
            sc.n = static_cast<std::uint32_t>(n);
        } else if (head == "setup") {
            stateful_only("setup");
            if (saw_setup) throw ParseError(line_no, "setup may appear only once");
            if (tokens.size() < 2) throw ParseError(line_no, "setup needs at least one user");
            Event ev;
            ev.op = Event::Op::Setup;
            ev.users.assign(tokens.begin() + 1, tokens.end());
            ev.line = line_no;
            sc.events.push_back(std::move(ev));
            saw_setup = true;
            saw_event = true;
        } else if (head == "join" || head == "leave" || head == "corrupt" || head == "reveal") {
            stateful_only(head.c_str());
            if (!saw_setup) throw ParseError(line_no, head + " before setup");
            if (tokens.size() != 2) throw ParseError(line_no, head + " takes one user");
            Event ev;
            ev.op = head == "join"      ? Event::Op::Join
                    : head == "leave"   ? Event::Op::Leave
                    : head == "corrupt" ? Event::Op::Corrupt
                                        : Event::Op::Reveal;
            ev.user = tokens[1];
            ev.line = line_no;
            if (ev.op == Event::Op::Corrupt) has_capture = true;
            sc.events.push_back(std::move(ev));
            saw_event = true;
        } else if (head == "forward-recover") {
            stateful_only("forward-recover");
            if (tokens.size() != 3) throw ParseError(line_no, "forward-recover takes user and time");
            Event ev;
            ev.op = Event::Op::ForwardRecover;
            ev.user = tokens[1];
            ev.at_time = static_cast<std::uint32_t>(parse_int(tokens[2], line_no));
            ev.line = line_no;
            sc.events.push_back(std::move(ev));
            saw_event = true;
        } else if (head == "broadcast") {
            stateless_only("broadcast");
            Event ev;
            ev.op = Event::Op::Broadcast;
            ev.line = line_no;
            const std::size_t msg_pos = line.find("msg=\"");
            if (msg_pos == std::string::npos)
                throw ParseError(line_no, "broadcast needs msg=\"...\"");
            const std::size_t msg_start = msg_pos + 5;
            const std::size_t msg_end = line.find('"', msg_start);
            if (msg_end == std::string::npos) throw ParseError(line_no, "unterminated msg string");
            const std::string payload = line.substr(msg_start, msg_end - msg_start);
            ev.message.assign(payload.begin(), payload.end());
            for (const auto& tok : tokenize(line.substr(0, msg_pos))) {
                if (tok == "broadcast") continue;
                if (tok.rfind("revoke=", 0) == 0) {
                    ev.revoked = parse_revoked(tok.substr(7), line_no);
                } else {
                    throw ParseError(line_no, "unknown broadcast option '" + tok + "'");
                }
            }
            sc.events.push_back(std::move(ev));
            saw_event = true;
        } else if (head == "corrupt-receiver") {
            stateless_only("corrupt-receiver");
            if (tokens.size() != 2) throw ParseError(line_no, "corrupt-receiver takes one number");
            Event ev;
            ev.op = Event::Op::CorruptReceiver;
            ev.receiver = static_cast<std::uint32_t>(parse_int(tokens[1], line_no));
            ev.line = line_no;
            has_capture = true;
            sc.events.push_back(std::move(ev));
            saw_event = true;
        } else if (head == "recover") {
            require_scheme();
            if (tokens.size() != 1) throw ParseError(line_no, "recover takes no arguments");
            if (!has_capture) throw ParseError(line_no, "recover before any corruption");
            Event ev;
            ev.op = Event::Op::Recover;
            ev.line = line_no;
            sc.events.push_back(std::move(ev));
            saw_event = true;
        } else {
            throw ParseError(line_no, "unknown directive '" + head + "'");
        }
    }
    if (!scheme_set) throw ParseError(line_no, "missing scheme directive");
    if (sc.stateful() && !saw_setup) throw ParseError(line_no, "stateful scenario needs setup");
    return sc;
}

namespace {

std::string join_users(const std::vector<UserId>& users) {
    std::string out;
    for (std::size_t i = 0; i < users.size(); ++i) {
        if (i) out += ",";
        out += users[i];
    }
    return out;
}

std::string printable(const Bytes& data) {
    std::string out;
    for (std::uint8_t b : data) {
        if (b >= 0x20 && b < 0x7f && b != '"' && b != '\\') {
            out.push_back(static_cast<char>(b));
        } else {
            static const char* digits = "0123456789abcdef";
            out += "\\x";
            out.push_back(digits[b >> 4]);
            out.push_back(digits[b & 0x0f]);
        }
    }
    return out;
}

std::uint32_t ceil_log(std::uint32_t base, std::uint32_t value) {
    std::uint32_t k = 0;
    std::uint64_t pow = 1;
    while (pow < value) {
        pow *= base;
        ++k;
    }
    return k;
}

const char* kind_name(RekeyKind k) {
    switch (k) {
        case RekeyKind::Setup: return "setup";
        case RekeyKind::Join: return "join";
        case RekeyKind::Leave: return "leave";
        case RekeyKind::KeyUpdateNotice: return "key-update";
    }
    return "?";
}

class StatefulRunner {
  public:
    StatefulRunner(const Scenario& sc, std::uint64_t seed, bool dump_keys)
        : sc_(sc), dump_keys_(dump_keys), rng_(seed) {
        stats_.scheme = to_string(sc.scheme);
        stats_.seed = seed;
    }

    RunResult run() {
        trace_ << "run scheme=" << to_string(sc_.scheme) << " degree=" << sc_.degree
               << " kappa=" << sc_.kappa << " seed=" << stats_.seed << "\n";
        for (const Event& ev : sc_.events) apply(ev);
        stats_.tape_ciphertexts = tape_ciphertexts();
        if (last_report_) {
            stats_.final_recovery_group_keys = last_report_->group_keys.size();
            stats_.final_recovery_plaintexts = last_report_->plaintexts.size();
        }
        return {trace_.str(), stats_};
    }

  private:
    RekeyPolicy policy() const {
        switch (sc_.scheme) {
            case Scheme::Lkh: return RekeyPolicy::Baseline;
            case Scheme::LkhStrong: return RekeyPolicy::Strong;
            default: return RekeyPolicy::StrongOpt;
        }
    }

    std::size_t tape_ciphertexts() const {
        std::size_t n = 0;
        for (const auto& e : tape_.entries())
            n += std::get<RekeyMessage>(e.message).ciphertext_count();
        return n;
    }

    void trace_message(const RekeyMessage& msg, std::size_t wire_bytes) {
        trace_ << "msg t=" << msg.time << " kind=" << kind_name(msg.kind)
               << " units=" << msg.units.size() << " ciphertexts=" << msg.ciphertext_count()
               << " bytes=" << wire_bytes << "\n";
        for (std::size_t ui = 0; ui < msg.units.size(); ++ui) {
            const RekeyUnit& unit = msg.units[ui];
            trace_ << "unit t=" << msg.time << " idx=" << ui
                   << " recipients=" << join_users(unit.recipients) << " items=" << unit.items.size()
                   << "\n";
            for (std::size_t ii = 0; ii < unit.items.size(); ++ii)
                trace_ << "ct t=" << msg.time << " unit=" << ui << " item=" << ii
                       << " key=" << unit.items[ii].key_id.to_string()
                       << " fp=" << unit.items[ii].fingerprint() << "\n";
        }
    }

    void after_event(const std::string& op, const RekeyMessage& msg,
                     std::uint64_t prf_member_max) {
        ctrl_->tree().validate();
        std::vector<const Member*> view;
        view.reserve(members_.size());
        for (const auto& [_, m] : members_) view.push_back(&m);
        verify_member_sync(*ctrl_, view);
        verify_erasure_hygiene(*ctrl_, view);

        // Per-member PRF budget for this event.
        const std::uint32_t n = static_cast<std::uint32_t>(ctrl_->members().size());
        const std::uint64_t bound =
            4ull * (ceil_log(static_cast<std::uint32_t>(sc_.degree), std::max(n, 1u)) + 1);
        if (prf_member_max > bound)
            throw InvariantViolation("member PRF budget exceeded: " +
                                     std::to_string(prf_member_max) + " > " +
                                     std::to_string(bound));

        EventStats es;
        es.time = ctrl_->time();
        es.op = op;
        es.ciphertexts = msg.ciphertext_count();
        es.bytes = msg.encode().size();
        es.tree_height = ctrl_->tree().height();
        es.prf_controller = ctrl_->last_event_prf();
        es.prf_member_max = prf_member_max;
        stats_.events.push_back(es);

        trace_ << ctrl_->tree().dump();
        trace_ << "groupkey t=" << ctrl_->time()
               << " keyfp=" << ctrl_->current_group_key().fingerprint();
        if (dump_keys_) trace_ << " key=" << to_hex(ctrl_->current_group_key().bytes());
        trace_ << "\n";
    }

    void apply(const Event& ev) {
        switch (ev.op) {
            case Event::Op::Setup: {
                auto [ctrl, members, msg] =
                    Controller::setup(ev.users, policy(), sc_.degree, sc_.key_len(), rng_);
                ctrl_.emplace(std::move(ctrl));
                std::uint64_t prf_max = 0;
                for (auto& m : members) {
                    prf_max = std::max(prf_max, m.last_event_prf());
                    members_.emplace(m.id(), std::move(m));
                }
                tape_.record(0, msg, ctrl_->group_key_ref());
                trace_ << "event t=0 op=setup users=" << join_users(ev.users) << "\n";
                trace_message(msg, tape_.entries().back().wire.size());
                after_event("setup", msg, prf_max);
                break;
            }
            case Event::Op::Join: {
                HeldKey indiv = ctrl_->establish_individual_key(ev.user, rng_);
                Member joiner(ev.user, policy(), ctrl_->time(), std::move(indiv));
                const RekeyMessage msg = ctrl_->join(ev.user, rng_);
                tape_.record(msg.time, msg, ctrl_->group_key_ref());
                std::uint64_t prf_max = 0;
                for (auto& [_, m] : members_) {
                    m.rekey(msg);
                    prf_max = std::max(prf_max, m.last_event_prf());
                }
                joiner.rekey(msg);
                prf_max = std::max(prf_max, joiner.last_event_prf());
                members_.emplace(ev.user, std::move(joiner));
                trace_ << "event t=" << msg.time << " op=join user=" << ev.user << "\n";
                trace_message(msg, tape_.entries().back().wire.size());
                after_event("join", msg, prf_max);
                break;
            }
            case Event::Op::Leave: {
                const RekeyMessage msg = ctrl_->leave(ev.user, rng_);
                tape_.record(msg.time, msg, ctrl_->group_key_ref());
                auto it = members_.find(ev.user);
                if (it == members_.end()) throw UnknownMember(ev.user);
                Member leaver = std::move(it->second);
                members_.erase(it);
                if (!leaver.corrupted()) leaver.erase_all();
                former_.insert_or_assign(ev.user, std::move(leaver));
                std::uint64_t prf_max = 0;
                for (auto& [_, m] : members_) {
                    m.rekey(msg);
                    prf_max = std::max(prf_max, m.last_event_prf());
                }
                trace_ << "event t=" << msg.time << " op=leave user=" << ev.user << "\n";
                trace_message(msg, tape_.entries().back().wire.size());
                after_event("leave", msg, prf_max);
                break;
            }
            case Event::Op::Corrupt: {
                Member* target = nullptr;
                auto it = members_.find(ev.user);
                if (it != members_.end()) {
                    target = &it->second;
                } else {
                    auto fit = former_.find(ev.user);
                    if (fit != former_.end()) target = &fit->second;
                }
                if (target == nullptr) throw UnknownMember(ev.user);
                const CapturedState cap = gcs::corrupt(*target, ctrl_->time());
                trace_ << "event op=corrupt user=" << ev.user << " t=" << ctrl_->time()
                       << " keys=" << cap.keys.size() << "\n";
                captures_.insert_or_assign(ev.user, cap);
                last_capture_ = ev.user;
                break;
            }
            case Event::Op::Reveal: {
                auto it = members_.find(ev.user);
                if (it == members_.end()) throw UnknownMember(ev.user);
                const SecretKey k = reveal(it->second, ctrl_->time());
                trace_ << "event op=reveal user=" << ev.user << " t=" << ctrl_->time()
                       << " keyfp=" << k.fingerprint() << "\n";
                break;
            }
            case Event::Op::Recover: {
                const CapturedState& cap = captures_.at(last_capture_);
                last_report_ = recover_closure(tape_, cap);
                trace_ << "event op=recover source=" << cap.source
                       << " keys=" << last_report_->known.size()
                       << " groupkeys=" << last_report_->group_keys.size()
                       << " plaintexts=" << last_report_->plaintexts.size() << "\n";
                trace_ << last_report_->to_trace();
                break;
            }
            case Event::Op::ForwardRecover: {
                auto it = captures_.find(ev.user);
                if (it == captures_.end()) throw UnknownMember(ev.user + " was never corrupted");
                last_report_ = forward_recover(tape_, it->second, ev.at_time);
                trace_ << "event op=forward-recover source=" << ev.user << " from=" << ev.at_time
                       << " groupkeys=" << last_report_->group_keys.size() << "\n";
                trace_ << last_report_->to_trace();
                break;
            }
            default:
                throw SchemeMismatch("stateless event in stateful scenario");
        }
    }

    const Scenario& sc_;
    bool dump_keys_;
    DeterministicRng rng_;
    std::optional<Controller> ctrl_;
    std::map<UserId, Member> members_;
    std::map<UserId, Member> former_;
    TrafficTape tape_;
    std::map<UserId, CapturedState> captures_;
    UserId last_capture_;
    std::optional<RecoveryReport> last_report_;
    std::ostringstream trace_;
    RunStats stats_;
};

class StatelessRunner {
  public:
    StatelessRunner(const Scenario& sc, std::uint64_t seed, bool dump_keys)
        : sc_(sc), dump_keys_(dump_keys), rng_(seed) {
        stats_.scheme = to_string(sc.scheme);
        stats_.seed = seed;
    }

    RunResult run() {
        trace_ << "run scheme=" << to_string(sc_.scheme) << " n=" << sc_.n
               << " kappa=" << sc_.kappa << " seed=" << stats_.seed << "\n";
        auto [sys, receivers] = cs_init(
            sc_.n, sc_.scheme == Scheme::CsStrong ? CsMode::Strong : CsMode::Baseline,
            sc_.key_len(), rng_);
        sys_ = std::move(sys);
        receivers_ = std::move(receivers);
        for (const Event& ev : sc_.events) apply(ev);
        stats_.tape_ciphertexts = tape_ciphertexts();
        if (last_report_) {
            stats_.final_recovery_group_keys = last_report_->group_keys.size();
            stats_.final_recovery_plaintexts = last_report_->plaintexts.size();
        }
        return {trace_.str(), stats_};
    }

  private:
    std::size_t tape_ciphertexts() const {
        std::size_t n = 0;
        for (const auto& e : tape_.entries())
            n += std::get<BroadcastMessage>(e.message).ciphertext_count();
        return n;
    }

    void apply(const Event& ev) {
        switch (ev.op) {
            case Event::Op::Broadcast: {
                const BroadcastMessage msg = broadcast(sys_, ev.revoked, ev.message, rng_);
                tape_.record(msg);

                std::string cover;
                for (std::size_t i = 0; i < msg.indices.size(); ++i) {
                    if (i) cover += ",";
                    cover += std::to_string(msg.indices[i]);
                }
                RevocationSet revoked = ev.revoked;
                trace_ << "event seq=" << msg.seq << " op=broadcast revoked=";
                bool first = true;
                for (std::uint32_t r : revoked) {
                    if (!first) trace_ << ",";
                    trace_ << r;
                    first = false;
                }
                trace_ << " cover=" << cover << " epoch=" << msg.epoch
                       << " flag=" << (msg.revocation ? 1 : 0)
                       << " ciphertexts=" << msg.ciphertext_count()
                       << " bytes=" << tape_.entries().back().wire.size() << "\n";
                for (std::size_t ii = 0; ii < msg.header.size(); ++ii)
                    trace_ << "ct seq=" << msg.seq << " item=" << ii
                           << " key=" << msg.header[ii].key_id.to_string()
                           << " fp=" << msg.header[ii].fingerprint() << "\n";
                trace_ << "ct seq=" << msg.seq << " item=body key=" << msg.body.key_id.to_string()
                       << " fp=" << msg.body.fingerprint() << "\n";

                // Deliver to every receiver and check the scheme's promises.
                const std::uint32_t log_n = heap_depth(sc_.n);
                std::uint64_t prf_max = 0;
                for (ReceiverSecrets& rs : receivers_) {
                    const bool was_current = rs.epoch == msg.epoch;
                    const auto plain = receiver_decrypt(rs, msg);
                    prf_max = std::max(prf_max, rs.last_msg_prf);
                    const bool is_revoked = revoked.count(rs.user) != 0;
                    if (is_revoked && plain)
                        throw InvariantViolation("revoked receiver decrypted a broadcast");
                    if (!is_revoked && (!plain || *plain != ev.message))
                        throw InvariantViolation("legitimate receiver failed to decrypt");
                    if (rs.epoch != sys_.epoch)
                        throw InvariantViolation("receiver epoch out of lockstep");
                    if (was_current && msg.revocation && rs.last_msg_prf > 2ull * (log_n + 1))
                        throw InvariantViolation("receiver PRF budget exceeded");
                    if (rs.last_search_probes >
                        static_cast<std::uint32_t>(std::log2(std::max(1u, log_n))) + 2)
                        throw InvariantViolation("ancestor search probed too many depths");
                    trace_ << "deliver seq=" << msg.seq << " receiver=" << rs.user
                           << " result=" << (plain ? "ok" : "revoked") << "\n";
                }
                if (msg.revocation && sys_.last_broadcast_next_evals !=
                                          static_cast<std::uint64_t>(2 * sc_.n - 1))
                    throw InvariantViolation("center evolution count off");

                EventStats es;
                es.time = msg.seq;
                es.op = "broadcast";
                es.ciphertexts = msg.ciphertext_count();
                es.bytes = tape_.entries().back().wire.size();
                es.prf_controller = sys_.last_broadcast_next_evals;
                es.prf_member_max = prf_max;
                stats_.events.push_back(es);
                break;
            }
            case Event::Op::CorruptReceiver: {
                if (ev.receiver < 1 || ev.receiver > sc_.n)
                    throw UnknownMember("receiver " + std::to_string(ev.receiver));
                const CapturedState cap = corrupt(receivers_[ev.receiver - 1], sys_.seq);
                trace_ << "event op=corrupt-receiver user=" << ev.receiver << " seq=" << sys_.seq
                       << " keys=" << cap.keys.size() << "\n";
                captures_.insert_or_assign(cap.source, cap);
                last_capture_ = cap.source;
                break;
            }
            case Event::Op::Recover: {
                const CapturedState& cap = captures_.at(last_capture_);
                last_report_ = stateless_recover(tape_, cap);
                trace_ << "event op=recover source=" << cap.source
                       << " sessionkeys=" << last_report_->group_keys.size()
                       << " plaintexts=" << last_report_->plaintexts.size() << "\n";
                trace_ << last_report_->to_trace();
                for (const auto& [seq, pt] : last_report_->plaintexts)
                    trace_ << "plaintext seq=" << seq << " msg=\"" << printable(pt) << "\"\n";
                break;
            }
            default:
                throw SchemeMismatch("stateful event in stateless scenario");
        }
    }

    const Scenario& sc_;
    bool dump_keys_;
    DeterministicRng rng_;
    SubsetSystem sys_;
    std::vector<ReceiverSecrets> receivers_;
    TrafficTape tape_;
    std::map<std::string, CapturedState> captures_;
    std::string last_capture_;
    std::optional<RecoveryReport> last_report_;
    std::ostringstream trace_;
    RunStats stats_;
};

}  // namespace

std::string RunStats::to_text() const {
    std::ostringstream out;
    out << "scheme=" << scheme << "\n";
    out << "seed=" << seed << "\n";
    out << "events=" << events.size() << "\n";
    for (std::size_t i = 0; i < events.size(); ++i) {
        const EventStats& es = events[i];
        const std::string p = "event" + std::to_string(i + 1) + ".";
        out << p << "op=" << es.op << "\n";
        out << p << "t=" << es.time << "\n";
        out << p << "ciphertexts=" << es.ciphertexts << "\n";
        out << p << "bytes=" << es.bytes << "\n";
        if (es.tree_height || es.op == "setup" || es.op == "join" || es.op == "leave")
            out << p << "tree_height=" << es.tree_height << "\n";
        out << p << "prf_controller=" << es.prf_controller << "\n";
        out << p << "prf_member_max=" << es.prf_member_max << "\n";
    }
    out << "tape_ciphertexts=" << tape_ciphertexts << "\n";
    out << "final_recovery.group_keys=" << final_recovery_group_keys << "\n";
    out << "final_recovery.plaintexts=" << final_recovery_plaintexts << "\n";
    return out.str();
}

RunResult run(const Scenario& scenario, std::uint64_t seed, bool dump_keys) {
    if (scenario.stateful()) return StatefulRunner(scenario, seed, dump_keys).run();
    return StatelessRunner(scenario, seed, dump_keys).run();
}

std::string compare_runs(const std::string& trace_a, const std::string& trace_b) {
    std::vector<std::string> a, b;
    {
        std::istringstream in(trace_a);
        std::string line;
        while (std::getline(in, line)) a.push_back(line);
    }
    {
        std::istringstream in(trace_b);
        std::string line;
        while (std::getline(in, line)) b.push_back(line);
    }
    std::ostringstream out;
    const std::size_t n = std::max(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        const std::string* la = i < a.size() ? &a[i] : nullptr;
        const std::string* lb = i < b.size() ? &b[i] : nullptr;
        if (la && lb && *la == *lb) continue;
        if (la) out << "-" << (i + 1) << ": " << *la << "\n";
        if (lb) out << "+" << (i + 1) << ": " << *lb << "\n";
    }
    return out.str();
}

}  // namespace gcs
