// Copyright 2026 The polenv Authors
// SPDX-License-Identifier: Apache-2.0
#include "polenv/sql_text.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <set>

namespace polenv::sql {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }

std::string rtrim(std::string s, std::string_view chars = " \t\r\n") {
    while (!s.empty() && chars.find(s.back()) != std::string_view::npos) s.pop_back();
    return s;
}

std::string code_of(std::string_view message) {
    static const std::regex re(R"(^\s*\[([A-Za-z0-9_]+)\])");
    std::match_results<std::string_view::const_iterator> m;
    if (std::regex_search(message.begin(), message.end(), m, re)) return m[1].str();
    return {};
}

// Index of the token after a possibly schema-qualified name starting at i.
std::size_t read_name(const std::vector<Token>& t, std::size_t i, std::string& name) {
    if (i >= t.size() || !t[i].is_identifier()) return i;
    name = t[i].text;
    if (i + 2 < t.size() && t[i + 1].is_punct(".") && t[i + 2].is_identifier()) {
        name = t[i + 2].text;
        return i + 3;
    }
    return i + 1;
}

} // namespace

bool Token::is_word(std::string_view upper_word) const {
    if (kind != TokenKind::Word || text.size() != upper_word.size()) return false;
    for (std::size_t i = 0; i < text.size(); ++i)
        if (std::toupper(static_cast<unsigned char>(text[i])) != upper_word[i]) return false;
    return true;
}

std::vector<Token> tokenize(std::string_view sql) {
    std::vector<Token> out;
    std::size_t i = 0;
    const std::size_t n = sql.size();
    while (i < n) {
        char c = sql[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '-' && i + 1 < n && sql[i + 1] == '-') {
            while (i < n && sql[i] != '\n') ++i;
            continue;
        }
        if (c == '/' && i + 1 < n && sql[i + 1] == '*') {
            auto close = sql.find("*/", i + 2);
            i = close == std::string_view::npos ? n : close + 2;
            continue;
        }
        Token tok{TokenKind::Punct, {}, i, i};
        if (c == '\'' || c == '"' || c == '`' || c == '[') {
            const char close = c == '[' ? ']' : c;
            tok.kind = c == '\'' ? TokenKind::String : TokenKind::QuotedIdent;
            ++i;
            while (i < n) {
                if (sql[i] == close) {
                    if (close != ']' && i + 1 < n && sql[i + 1] == close) {
                        tok.text.push_back(close);
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                tok.text.push_back(sql[i++]);
            }
        } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                   (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(sql[i + 1])))) {
            tok.kind = TokenKind::Number;
            while (i < n && (std::isalnum(static_cast<unsigned char>(sql[i])) || sql[i] == '.')) {
                tok.text.push_back(sql[i]);
                // exponent sign
                if ((sql[i] == 'e' || sql[i] == 'E') && i + 1 < n && (sql[i + 1] == '+' || sql[i + 1] == '-'))
                    tok.text.push_back(sql[++i]);
                ++i;
            }
        } else if (ident_start(c)) {
            tok.kind = TokenKind::Word;
            while (i < n && ident_char(sql[i])) tok.text.push_back(sql[i++]);
        } else {
            static constexpr std::string_view two[] = {">=", "<=", "!=", "<>", "==", "||"};
            tok.text = std::string(1, c);
            for (auto op : two) {
                if (sql.substr(i, 2) == op) {
                    tok.text = std::string(op);
                    break;
                }
            }
            i += tok.text.size();
        }
        tok.end = i;
        out.push_back(std::move(tok));
    }
    return out;
}

std::vector<std::string> split_statements(std::string_view sql) {
    auto tokens = tokenize(sql);
    std::vector<std::string> out;
    std::size_t start = 0;
    bool open = false, is_trigger = false, in_body = false;
    int case_depth = 0;

    auto emit = [&](std::size_t end) {
        auto text = rtrim(std::string(sql.substr(start, end - start)));
        if (!text.empty()) out.push_back(std::move(text));
        open = is_trigger = in_body = false;
        case_depth = 0;
    };

    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto& tok = tokens[i];
        if (!open) {
            if (tok.is_punct(";")) continue;
            open = true;
            start = tok.begin;
            if (tok.is_word("CREATE")) {
                std::size_t j = i + 1;
                if (j < tokens.size() && (tokens[j].is_word("TEMP") || tokens[j].is_word("TEMPORARY"))) ++j;
                is_trigger = j < tokens.size() && tokens[j].is_word("TRIGGER");
            }
        }
        if (is_trigger) {
            if (!in_body) {
                if (tok.is_word("BEGIN")) in_body = true;
                continue;
            }
            if (tok.is_word("CASE")) {
                ++case_depth;
            } else if (tok.is_word("END")) {
                if (case_depth > 0) {
                    --case_depth;
                } else {
                    emit(tok.end);
                    if (i + 1 < tokens.size() && tokens[i + 1].is_punct(";")) ++i;
                }
            }
            continue;
        }
        if (tok.is_punct(";")) emit(tok.begin);
    }
    if (open) emit(sql.size());
    return out;
}

std::vector<TriggerDef> parse_triggers(std::string_view sql) {
    std::vector<TriggerDef> out;
    for (auto& stmt : split_statements(sql)) {
        auto t = tokenize(stmt);
        std::size_t i = 0;
        if (i >= t.size() || !t[i].is_word("CREATE")) continue;
        ++i;
        if (i < t.size() && (t[i].is_word("TEMP") || t[i].is_word("TEMPORARY"))) ++i;
        if (i >= t.size() || !t[i].is_word("TRIGGER")) continue;
        ++i;
        if (i + 2 < t.size() && t[i].is_word("IF") && t[i + 1].is_word("NOT") && t[i + 2].is_word("EXISTS")) i += 3;

        TriggerDef def;
        def.sql = stmt;
        i = read_name(t, i, def.name);
        def.timing = "BEFORE";  // SQLite default
        if (i < t.size() && (t[i].is_word("BEFORE") || t[i].is_word("AFTER"))) {
            def.timing = t[i].is_word("BEFORE") ? "BEFORE" : "AFTER";
            ++i;
        } else if (i + 1 < t.size() && t[i].is_word("INSTEAD") && t[i + 1].is_word("OF")) {
            def.timing = "INSTEAD OF";
            i += 2;
        }
        if (i < t.size()) {
            if (t[i].is_word("INSERT")) def.event = "INSERT";
            else if (t[i].is_word("UPDATE")) def.event = "UPDATE";
            else if (t[i].is_word("DELETE")) def.event = "DELETE";
            ++i;
        }
        if (def.event == "UPDATE" && i < t.size() && t[i].is_word("OF")) {
            ++i;
            while (i < t.size() && t[i].is_identifier() && !t[i].is_word("ON")) {
                def.update_columns.push_back(t[i].text);
                ++i;
                if (i < t.size() && t[i].is_punct(",")) ++i;
            }
        }
        if (i < t.size() && t[i].is_word("ON")) i = read_name(t, i + 1, def.table);

        while (i < t.size() && !t[i].is_word("BEGIN")) ++i;
        std::size_t body_begin = i + 1;
        std::size_t body_end = t.size();
        if (body_end > body_begin && t[body_end - 1].is_word("END")) --body_end;
        for (std::size_t k = body_begin; k < body_end; ++k) def.body.push_back(t[k]);

        for (std::size_t k = 0; k + 4 < def.body.size(); ++k) {
            const auto& b = def.body;
            if (b[k].is_word("RAISE") && b[k + 1].is_punct("(") && b[k + 3].is_punct(",") &&
                b[k + 4].kind == TokenKind::String) {
                def.raises.push_back({code_of(b[k + 4].text), b[k + 4].text});
            }
        }
        out.push_back(std::move(def));
    }
    return out;
}

std::vector<std::string> precondition_lines(const TriggerDef& trigger) {
    std::vector<std::string> out;
    for (const auto& r : trigger.raises) {
        auto line = rtrim(r.text, " \t\r\n:");
        if (!line.empty() && std::find(out.begin(), out.end(), line) == out.end()) out.push_back(line);
    }
    return out;
}

std::vector<std::string> side_effect_lines(const TriggerDef& trigger) {
    std::vector<std::string> out;
    auto add = [&](std::string line) {
        if (std::find(out.begin(), out.end(), line) == out.end()) out.push_back(std::move(line));
    };
    const auto& b = trigger.body;
    bool at_start = true;
    int depth = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (b[i].is_punct("(")) ++depth;
        if (b[i].is_punct(")")) --depth;
        if (b[i].is_punct(";") && depth == 0) {
            at_start = true;
            continue;
        }
        if (!at_start) continue;
        at_start = false;
        std::size_t j = i + 1;
        if (j + 1 < b.size() && b[j].is_word("OR")) j += 2;  // UPDATE OR IGNORE ...
        if (b[i].is_word("UPDATE")) {
            std::string table;
            j = read_name(b, j, table);
            if (j >= b.size() || !b[j].is_word("SET")) continue;
            int pdepth = 0, cdepth = 0;
            bool expect_column = true;
            for (std::size_t k = j + 1; k < b.size(); ++k) {
                const auto& tk = b[k];
                if (tk.is_punct("(")) ++pdepth;
                else if (tk.is_punct(")")) --pdepth;
                else if (tk.is_word("CASE")) ++cdepth;
                else if (tk.is_word("END")) --cdepth;
                if (pdepth == 0 && cdepth == 0) {
                    if (tk.is_punct(";") || tk.is_word("WHERE") || tk.is_word("FROM") || tk.is_word("RETURNING")) break;
                    if (tk.is_punct(",")) {
                        expect_column = true;
                        continue;
                    }
                    if (expect_column && tk.is_identifier() && k + 1 < b.size() && b[k + 1].is_punct("=")) {
                        add("Updates " + table + "." + tk.text);
                    }
                }
                expect_column = false;
            }
        } else if (b[i].is_word("INSERT") || b[i].is_word("REPLACE")) {
            if (j < b.size() && b[j].is_word("INTO")) {
                std::string table;
                read_name(b, j + 1, table);
                if (!table.empty()) add("Inserts a row into " + table);
            }
        } else if (b[i].is_word("DELETE")) {
            if (j < b.size() && b[j].is_word("FROM")) {
                std::string table;
                read_name(b, j + 1, table);
                if (!table.empty()) add("Deletes rows from " + table);
            }
        }
    }
    return out;
}

std::vector<std::string> raised_codes(const std::vector<TriggerDef>& triggers) {
    std::set<std::string> codes;
    for (const auto& t : triggers)
        for (const auto& r : t.raises)
            if (!r.code.empty()) codes.insert(r.code);
    return {codes.begin(), codes.end()};
}

std::vector<QuotaRule> detect_quota_rules(const std::vector<TriggerDef>& triggers) {
    std::vector<QuotaRule> out;
    for (const auto& trig : triggers) {
        if (trig.timing != "BEFORE" || trig.event != "INSERT") continue;
        const auto& b = trig.body;
        for (std::size_t k = 0; k + 13 < b.size(); ++k) {
            // ( SELECT col FROM parent WHERE key = NEW . fk ) op N
            if (!(b[k].is_punct("(") && b[k + 1].is_word("SELECT") && b[k + 2].is_identifier() &&
                  b[k + 3].is_word("FROM") && b[k + 4].is_identifier() && b[k + 5].is_word("WHERE") &&
                  b[k + 6].is_identifier() && b[k + 7].is_punct("=") && b[k + 8].is_word("NEW") &&
                  b[k + 9].is_punct(".") && b[k + 10].is_identifier() && b[k + 11].is_punct(")") &&
                  (b[k + 12].is_punct(">=") || b[k + 12].is_punct(">")) && b[k + 13].kind == TokenKind::Number))
                continue;
            QuotaRule rule;
            rule.trigger = trig.name;
            rule.child_table = trig.table;
            rule.count_column = b[k + 2].text;
            rule.parent_table = b[k + 4].text;
            rule.parent_key = b[k + 6].text;
            rule.fk_column = b[k + 10].text;
            try {
                rule.capacity = std::stoll(b[k + 13].text);
            } catch (...) {
                continue;
            }
            if (b[k + 12].is_punct(">")) rule.capacity += 1;
            for (std::size_t r = k + 14; r + 4 < b.size(); ++r) {
                if (b[r].is_word("RAISE") && b[r + 4].kind == TokenKind::String) {
                    rule.code = code_of(b[r + 4].text);
                    break;
                }
            }
            out.push_back(std::move(rule));
        }
    }
    return out;
}

EnumDomains enum_domains(std::string_view schema_sql) {
    EnumDomains out;
    for (const auto& stmt : split_statements(schema_sql)) {
        const auto t = tokenize(stmt);
        if (t.size() < 3 || !t[0].is_word("CREATE") || !t[1].is_word("TABLE")) continue;
        std::size_t i = 2;
        if (i + 2 < t.size() && t[i].is_word("IF") && t[i + 1].is_word("NOT") && t[i + 2].is_word("EXISTS")) i += 3;
        std::string table;
        i = read_name(t, i, table);
        for (; i + 4 < t.size(); ++i) {
            if (!t[i].is_word("CHECK") || !t[i + 1].is_punct("(") || !t[i + 2].is_identifier() ||
                !t[i + 3].is_word("IN") || !t[i + 4].is_punct("("))
                continue;
            std::vector<std::string> values;
            std::size_t j = i + 5;
            bool literal_list = true;
            for (; j < t.size() && !t[j].is_punct(")"); ++j) {
                if (t[j].is_punct(",")) continue;
                if (t[j].kind != TokenKind::String && t[j].kind != TokenKind::Number) literal_list = false;
                values.push_back(t[j].text);
            }
            if (literal_list && !values.empty()) out[table][t[i + 2].text] = std::move(values);
            i = j;
        }
    }
    return out;
}

std::map<std::string, TableLayer> table_layers(std::string_view schema_sql) {
    static const std::regex re(R"(--\s*L([0-9])[A-Za-z_]*\s+Table:\s*([A-Za-z_][A-Za-z0-9_]*))");
    std::map<std::string, TableLayer> out;
    std::string text(schema_sql);
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
        const auto level = (*it)[1].str();
        TableLayer layer = level == "0" ? TableLayer::Reference
                           : level == "1" ? TableLayer::Entity
                                          : TableLayer::Transaction;
        out[(*it)[2].str()] = layer;
    }
    return out;
}

} // namespace polenv::sql
