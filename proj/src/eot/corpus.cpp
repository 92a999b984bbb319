#include "duplex/eot/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <stdexcept>

#include "duplex/runtime/random.hpp"
#include "duplex/util/text.hpp"

namespace duplex::eot {
namespace {

bool is_punct_token(std::string_view tok) {
    static constexpr std::string_view ascii = ".,!?;:\"'()-";
    static const std::vector<std::string_view> wide{"。", "，", "？", "！", "、", "；", "：", "…", "“", "”"};
    if (tok.empty()) return true;
    if (std::all_of(tok.begin(), tok.end(), [](char c) { return ascii.find(c) != std::string_view::npos; })) {
        return true;
    }
    return std::find(wide.begin(), wide.end(), tok) != wide.end();
}

// Token end offsets into the source, tagged with whether the token carries content.
struct Token {
    std::size_t end;
    bool content;
};

std::vector<Token> tokenize(std::string_view s, audio::Language lang) {
    std::vector<Token> out;
    if (lang == audio::Language::zh) {
        for (auto cp : text::utf8_codepoints(s)) {
            if (text::trim(cp).empty()) continue;
            out.push_back({static_cast<std::size_t>(cp.data() + cp.size() - s.data()), !is_punct_token(cp)});
        }
    } else {
        for (auto tok : text::split_whitespace(s)) {
            out.push_back({static_cast<std::size_t>(tok.data() + tok.size() - s.data()), !is_punct_token(tok)});
        }
    }
    return out;
}

}  // namespace

audio::Language detect_language(std::string_view s) {
    for (auto cp : text::utf8_codepoints(s)) {
        if (text::is_cjk(cp)) return audio::Language::zh;
    }
    return audio::Language::en;
}

CorpusBuild build_eot_corpus(std::span<const std::string> full_utterances, std::size_t spans_per_utterance,
                             std::uint64_t seed) {
    SeededRng rng(seed);
    CorpusBuild out;
    out.examples.reserve(full_utterances.size() * (1 + spans_per_utterance));
    for (const auto& raw : full_utterances) {
        const std::string_view src = text::trim(raw);
        const auto lang = detect_language(src);
        const auto tokens = tokenize(src, lang);
        // Valid cut points: after token i, provided a content token remains.
        std::vector<std::size_t> cuts;
        std::size_t content_after = 0;
        for (const auto& t : tokens) content_after += t.content;
        std::size_t seen = 0;
        for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
            seen += tokens[i].content;
            if (tokens[i].content && content_after - seen > 0) cuts.push_back(tokens[i].end);
        }
        if (content_after < 2 || cuts.empty()) {
            ++out.skipped;
            continue;
        }
        out.examples.push_back({std::string(src), EotLabel::finished, lang});
        for (std::size_t k = 0; k < spans_per_utterance; ++k) {
            const std::size_t cut = cuts[rng.index(cuts.size())];
            out.examples.push_back({std::string(src.substr(0, cut)), EotLabel::unfinished, lang});
        }
    }
    return out;
}

std::vector<EotExample> read_eot_jsonl(std::istream& in) {
    std::vector<EotExample> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            EotExample e;
            e.text = j.at("text").get<std::string>();
            e.label = label_from_string(j.at("label").get<std::string>());
            e.language = j.contains("lang") ? audio::language_from_string(j["lang"].get<std::string>())
                                            : detect_language(e.text);
            out.push_back(std::move(e));
        } catch (const std::exception& ex) {
            throw std::runtime_error("eot corpus line " + std::to_string(lineno) + ": " + ex.what());
        }
    }
    return out;
}

std::vector<EotExample> read_eot_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open eot corpus " + path.string());
    return read_eot_jsonl(in);
}

void write_eot_jsonl(std::ostream& out, std::span<const EotExample> examples) {
    for (const auto& e : examples) {
        const nlohmann::json j{{"text", e.text}, {"label", to_string(e.label)}, {"lang", audio::to_string(e.language)}};
        out << j.dump() << '\n';
    }
}

std::vector<std::string> sample_utterances(std::size_t count, std::uint64_t seed, audio::Language language) {
    static const std::vector<std::string> en_open{
        "can you", "please", "I want to", "could you", "I would like to", "help me", "tell me how to", "let's"};
    static const std::vector<std::string> en_verb{"book", "find", "check", "play", "order", "cancel", "show me",
                                                  "remind me about", "search for", "read"};
    static const std::vector<std::string> en_obj{
        "a table for two tonight",        "the weather in Beijing today",     "some jazz music",
        "my meeting with the design team", "a flight to Shanghai next Monday", "the latest news about the game",
        "a taxi to the airport",          "the recipe for dumplings",         "my unread messages",
        "the traffic on the way home"};
    static const std::vector<std::string> zh_open{"帮我", "请", "我想", "能不能", "你可以"};
    static const std::vector<std::string> zh_verb{"查一下", "订", "播放", "打开", "取消", "找"};
    static const std::vector<std::string> zh_obj{"明天北京的天气", "一张去上海的机票", "周杰伦的歌", "客厅的灯",
                                                 "下午三点的会议", "附近的川菜馆", "今天的新闻", "去机场的出租车"};
    SeededRng rng(seed);
    std::vector<std::string> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        if (language == audio::Language::zh) {
            out.push_back(zh_open[rng.index(zh_open.size())] + zh_verb[rng.index(zh_verb.size())] +
                          zh_obj[rng.index(zh_obj.size())] + (rng.bernoulli(0.5) ? "。" : ""));
        } else {
            out.push_back(en_open[rng.index(en_open.size())] + " " + en_verb[rng.index(en_verb.size())] + " " +
                          en_obj[rng.index(en_obj.size())] + (rng.bernoulli(0.5) ? "." : ""));
        }
    }
    return out;
}

}  // namespace duplex::eot
