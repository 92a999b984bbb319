#include "duplex/eot/backend.hpp"

#include <httplib.h>

#include <algorithm>
#include <array>
#include <json.hpp>

#include "duplex/util/text.hpp"

namespace duplex::eot {
namespace {

using namespace std::string_view_literals;

constexpr std::array kDanglingEn{
    // prepositions
    "to"sv, "for"sv, "of"sv, "in"sv, "on"sv, "at"sv, "with"sv, "from"sv, "about"sv, "into"sv, "by"sv, "via"sv,
    "over"sv, "under"sv, "after"sv, "before"sv, "between"sv, "through"sv, "like"sv, "near"sv, "towards"sv,
    // conjunctions
    "and"sv, "or"sv, "but"sv, "because"sv, "so"sv, "if"sv, "when"sv, "while"sv, "although"sv, "though"sv,
    "than"sv, "whether"sv, "unless"sv, "until"sv, "since"sv, "then"sv,
    // determiners and possessives
    "the"sv, "a"sv, "an"sv, "this"sv, "these"sv, "those"sv, "my"sv, "your"sv, "his"sv, "her"sv, "our"sv,
    "their"sv, "its"sv, "some"sv, "any"sv, "every"sv, "each"sv, "another"sv,
    // auxiliaries, modals and subject pronouns that need a continuation
    "is"sv, "are"sv, "was"sv, "were"sv, "am"sv, "be"sv, "can"sv, "could"sv, "would"sv, "will"sv, "should"sv,
    "shall"sv, "may"sv, "might"sv, "must"sv, "do"sv, "does"sv, "did"sv, "have"sv, "has"sv, "want"sv,
    "need"sv, "wanna"sv, "gonna"sv, "i"sv, "i'm"sv, "we"sv, "they"sv, "he"sv, "she"sv, "let's"sv,
    "please"sv, "what's"sv, "where's"sv, "how's"sv,
};

constexpr std::array kFillersEn{"um"sv, "uh"sv, "er"sv, "erm"sv, "hmm"sv, "like,"sv, "well"sv};

constexpr std::array kQuestionStartEn{
    "what"sv, "what's"sv, "where"sv, "where's"sv, "when"sv, "why"sv, "how"sv, "how's"sv, "who"sv, "which"sv,
    "is"sv, "are"sv, "can"sv, "could"sv, "would"sv, "will"sv, "do"sv, "does"sv, "did"sv, "should"sv,
};

// Chinese endings that leave the clause open.
constexpr std::array kDanglingZh{
    "的"sv, "和"sv, "跟"sv, "与"sv, "或"sv, "或者"sv, "但是"sv, "但"sv, "可是"sv, "因为"sv, "所以"sv,
    "在"sv, "把"sv, "给"sv, "对"sv, "向"sv, "从"sv, "如果"sv, "然后"sv, "还有"sv, "就是"sv, "而且"sv,
    "还是"sv, "要"sv, "想"sv, "去"sv, "是"sv, "我"sv, "这个"sv, "那个"sv, "一个"sv, "关于"sv, "比"sv,
    "呃"sv, "嗯"sv, "那"sv, "这"sv, "帮我"sv, "请"sv, "被"sv, "让"sv,
};

// Sentence-final particles that close a clause.
constexpr std::array kFinalParticlesZh{"吗"sv, "呢"sv, "吧"sv, "了"sv, "啊"sv, "呀"sv, "么"sv, "嘛"sv};

constexpr std::array kTerminal{"."sv, "?"sv, "!"sv, "。"sv, "？"sv, "！"sv};
constexpr std::array kContinuing{","sv, "，"sv, "、"sv, ";"sv, "；"sv, ":"sv, "："sv, "-"sv, "…"sv};

template <std::size_t N>
bool contains(const std::array<std::string_view, N>& set, std::string_view s) {
    return std::find(set.begin(), set.end(), s) != set.end();
}

std::string strip_edge_punct(std::string_view tok) {
    while (!tok.empty() && std::string_view(".,!?;:\"'()").find(tok.back()) != std::string_view::npos) {
        tok.remove_suffix(1);
    }
    while (!tok.empty() && std::string_view("\"'(").find(tok.front()) != std::string_view::npos) {
        tok.remove_prefix(1);
    }
    return text::to_lower_ascii(tok);
}

EotDecision decide_zh(const std::vector<std::string_view>& cps) {
    // Last two code points as a suffix string, for two-character connectives.
    const std::string last(cps.back());
    const std::string last2 = cps.size() >= 2 ? std::string(cps[cps.size() - 2]) + last : last;
    if (contains(kDanglingZh, last2) || contains(kDanglingZh, last)) return {EotLabel::unfinished, 0.85};
    if (contains(kFinalParticlesZh, last)) return {EotLabel::finished, 0.85};
    std::size_t hanzi = 0;
    for (auto cp : cps) hanzi += text::is_cjk(cp);
    if (hanzi < 2) return {EotLabel::unfinished, 0.6};
    return {EotLabel::finished, 0.6};
}

EotDecision decide_en(std::string_view t) {
    const auto raw = text::split_whitespace(t);
    std::vector<std::string> tokens;
    for (auto r : raw) {
        auto s = strip_edge_punct(r);
        if (!s.empty()) tokens.push_back(std::move(s));
    }
    if (tokens.empty()) return {EotLabel::unfinished, 0.6};
    const auto& last = tokens.back();
    if (contains(kDanglingEn, last)) return {EotLabel::unfinished, 0.9};
    if (contains(kFillersEn, last)) return {EotLabel::unfinished, 0.8};
    if (contains(kQuestionStartEn, tokens.front()) && tokens.size() >= 3) return {EotLabel::finished, 0.8};
    if (tokens.size() == 1 && contains(kQuestionStartEn, last)) return {EotLabel::unfinished, 0.7};
    return {EotLabel::finished, 0.6};
}

}  // namespace

std::string to_string(EotLabel label) { return label == EotLabel::finished ? "finished" : "unfinished"; }

EotLabel label_from_string(std::string_view s) {
    if (s == "finished") return EotLabel::finished;
    if (s == "unfinished") return EotLabel::unfinished;
    throw std::invalid_argument("unknown eot label '" + std::string(s) + "'");
}

EotDecision eot_decide(std::string_view transcript, const EotBackend& backend) {
    if (text::trim(transcript).empty()) throw std::invalid_argument("eot: empty transcript");
    return backend.decide(text::trim(transcript));
}

EotDecision RuleEotBackend::decide(std::string_view transcript) const {
    const auto t = text::trim(transcript);
    if (t.empty()) throw std::invalid_argument("eot: empty transcript");
    const auto cps = text::utf8_codepoints(t);
    const std::string_view last = cps.back();
    if (contains(kContinuing, last) || t.ends_with("...")) return {EotLabel::unfinished, 0.9};
    if (contains(kTerminal, last)) return {EotLabel::finished, 0.95};

    const bool zh = std::any_of(cps.begin(), cps.end(), [](auto cp) { return text::is_cjk(cp); });
    return zh ? decide_zh(cps) : decide_en(t);
}

std::string ConstantEotBackend::name() const { return "always-" + to_string(label_); }

RemoteEotBackend::RemoteEotBackend(RemoteEotConfig config) : config_(std::move(config)) {
    const auto scheme = config_.url.find("://");
    if (scheme == std::string::npos) throw std::invalid_argument("remote eot: url needs a scheme: " + config_.url);
    const auto slash = config_.url.find('/', scheme + 3);
    scheme_host_port_ = config_.url.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : config_.url.substr(slash);
}

EotDecision RemoteEotBackend::decide(std::string_view transcript) const {
    httplib::Client client(scheme_host_port_);
    const auto secs = config_.timeout.count() / 1000;
    const auto usecs = (config_.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    const nlohmann::json body{{"text", std::string(transcript)}};
    auto res = client.Post(path_, body.dump(), "application/json");
    if (!res) {
        if (res.error() == httplib::Error::Read || res.error() == httplib::Error::ConnectionTimeout) {
            throw EotTimeout("remote eot: no answer within " + std::to_string(config_.timeout.count()) + " ms");
        }
        throw EotBackendError("remote eot: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) throw EotBackendError("remote eot: HTTP " + std::to_string(res->status));
    try {
        const auto j = nlohmann::json::parse(res->body);
        EotDecision d;
        d.label = label_from_string(j.at("label").get<std::string>());
        d.confidence = j.value("confidence", 1.0);
        return d;
    } catch (const std::exception& e) {
        throw EotBackendError(std::string("remote eot: malformed reply: ") + e.what());
    }
}

std::unique_ptr<EotBackend> make_eot_backend(const std::string& spec, std::chrono::milliseconds remote_timeout) {
    if (spec == "rule") return std::make_unique<RuleEotBackend>();
    if (spec == "always-finished") return std::make_unique<ConstantEotBackend>(EotLabel::finished);
    if (spec == "always-unfinished") return std::make_unique<ConstantEotBackend>(EotLabel::unfinished);
    if (spec.starts_with("remote:")) {
        return std::make_unique<RemoteEotBackend>(RemoteEotConfig{spec.substr(7), remote_timeout});
    }
    throw std::invalid_argument("unknown eot backend '" + spec +
                                "' (expected rule, always-finished, always-unfinished or remote:<url>)");
}

std::string join_transcripts(const std::string& accumulated, std::string_view next) {
    const auto n = text::trim(next);
    if (n.empty()) return accumulated;
    if (accumulated.empty()) return std::string(n);
    return accumulated + " " + std::string(n);
}

}  // namespace duplex::eot
