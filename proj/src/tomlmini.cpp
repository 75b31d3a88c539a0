#include "vch/tomlmini.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace vch::toml {

namespace {

[[noreturn]] void fail(int line, const std::string& what) {
    throw ParseError("toml: line " + std::to_string(line) + ": " + what);
}

struct Cursor {
    std::string_view text;
    std::size_t pos = 0;
    int line = 1;

    bool done() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }
    char take() {
        const char c = text[pos++];
        if (c == '\n') ++line;
        return c;
    }

    // Skip spaces, tabs, and comments; newlines too when `newlines` is set.
    void skip_ws(bool newlines) {
        while (!done()) {
            const char c = peek();
            if (c == ' ' || c == '\t' || c == '\r') {
                take();
            } else if (c == '#') {
                while (!done() && peek() != '\n') take();
            } else if (newlines && c == '\n') {
                take();
            } else {
                break;
            }
        }
    }
};

bool is_bare_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '-';
}

std::string parse_bare_key(Cursor& cur) {
    std::string key;
    while (!cur.done() && is_bare_char(cur.peek())) key.push_back(cur.take());
    if (key.empty()) fail(cur.line, "expected a key");
    return key;
}

std::vector<std::string> parse_key_path(Cursor& cur) {
    std::vector<std::string> path{parse_bare_key(cur)};
    while (!cur.done() && cur.peek() == '.') {
        cur.take();
        path.push_back(parse_bare_key(cur));
    }
    return path;
}

std::string parse_string_value(Cursor& cur) {
    cur.take();  // opening quote
    std::string out;
    while (true) {
        if (cur.done()) fail(cur.line, "unterminated string");
        const char c = cur.take();
        if (c == '"') break;
        if (c == '\n') fail(cur.line - 1, "newline inside string");
        if (c == '\\') {
            if (cur.done()) fail(cur.line, "dangling escape");
            const char e = cur.take();
            switch (e) {
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                default: fail(cur.line, std::string("unsupported escape \\") + e);
            }
        } else {
            out.push_back(c);
        }
    }
    return out;
}

Value parse_value(Cursor& cur);

Value parse_array_value(Cursor& cur) {
    cur.take();  // '['
    Value v;
    v.kind = Value::Kind::array;
    cur.skip_ws(true);
    while (true) {
        if (cur.done()) fail(cur.line, "unterminated array");
        if (cur.peek() == ']') {
            cur.take();
            break;
        }
        v.array.push_back(parse_value(cur));
        cur.skip_ws(true);
        if (cur.done()) fail(cur.line, "unterminated array");
        if (cur.peek() == ',') {
            cur.take();
            cur.skip_ws(true);
        } else if (cur.peek() != ']') {
            fail(cur.line, "expected ',' or ']' in array");
        }
    }
    return v;
}

Value parse_scalar(Cursor& cur) {
    std::string tok;
    while (!cur.done()) {
        const char c = cur.peek();
        if (c == ',' || c == ']' || c == '\n' || c == '#' || c == ' ' || c == '\t' || c == '\r') break;
        tok.push_back(cur.take());
    }
    if (tok.empty()) fail(cur.line, "expected a value");

    Value v;
    if (tok == "true" || tok == "false") {
        v.kind = Value::Kind::boolean;
        v.bool_v = tok == "true";
        return v;
    }
    const bool looks_float = tok.find_first_of(".eE") != std::string::npos || tok == "inf" || tok == "-inf" ||
                             tok == "nan";
    if (!looks_float) {
        long long iv = 0;
        const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), iv);
        if (ec == std::errc() && ptr == tok.data() + tok.size()) {
            v.kind = Value::Kind::integer;
            v.int_v = iv;
            return v;
        }
    }
    try {
        std::size_t used = 0;
        const double dv = std::stod(tok, &used);
        if (used == tok.size()) {
            v.kind = Value::Kind::floating;
            v.float_v = dv;
            return v;
        }
    } catch (const std::exception&) {
    }
    fail(cur.line, "cannot parse value '" + tok + "'");
}

Value parse_value(Cursor& cur) {
    cur.skip_ws(false);
    if (cur.done()) fail(cur.line, "expected a value");
    const char c = cur.peek();
    if (c == '"') {
        Value v;
        v.kind = Value::Kind::string;
        v.str = parse_string_value(cur);
        return v;
    }
    if (c == '[') return parse_array_value(cur);
    if (c == '{') fail(cur.line, "inline tables are not supported");
    return parse_scalar(cur);
}

Value* descend_tables(Value* node, const std::vector<std::string>& path, int line) {
    for (const std::string& key : path) {
        Value& slot = node->table[key];
        if (slot.kind == Value::Kind::table && slot.array.empty()) {
            node = &slot;
        } else if (slot.kind == Value::Kind::array && !slot.array.empty()) {
            node = &slot.array.back();  // latest array-of-tables element
        } else {
            fail(line, "key '" + key + "' is not a table");
        }
    }
    return node;
}

void expect_line_end(Cursor& cur) {
    cur.skip_ws(false);
    if (!cur.done() && cur.peek() != '\n') fail(cur.line, "trailing content");
}

}  // namespace

const std::string& Value::as_string() const {
    if (kind != Kind::string) throw ParseError("toml: expected a string value");
    return str;
}

long long Value::as_int() const {
    if (kind != Kind::integer) throw ParseError("toml: expected an integer value");
    return int_v;
}

double Value::as_double() const {
    if (kind == Kind::floating) return float_v;
    if (kind == Kind::integer) return static_cast<double>(int_v);
    throw ParseError("toml: expected a numeric value");
}

bool Value::as_bool() const {
    if (kind != Kind::boolean) throw ParseError("toml: expected a boolean value");
    return bool_v;
}

Value parse(std::string_view text) {
    Value root;
    Cursor cur{text};
    Value* current = &root;

    while (true) {
        cur.skip_ws(true);
        if (cur.done()) break;

        if (cur.peek() == '[') {
            const int line = cur.line;
            cur.take();
            const bool array_of_tables = !cur.done() && cur.peek() == '[';
            if (array_of_tables) cur.take();
            cur.skip_ws(false);
            const std::vector<std::string> path = parse_key_path(cur);
            cur.skip_ws(false);
            if (cur.done() || cur.take() != ']') fail(line, "expected ']'");
            if (array_of_tables && (cur.done() || cur.take() != ']')) fail(line, "expected ']]'");
            expect_line_end(cur);

            Value* parent = path.size() > 1
                                ? descend_tables(&root, {path.begin(), path.end() - 1}, line)
                                : &root;
            Value& slot = parent->table[path.back()];
            if (array_of_tables) {
                if (slot.kind == Value::Kind::table && slot.table.empty() && slot.array.empty())
                    slot.kind = Value::Kind::array;
                if (slot.kind != Value::Kind::array) fail(line, "key '" + path.back() + "' is not an array of tables");
                slot.array.emplace_back();
                current = &slot.array.back();
            } else {
                if (slot.kind != Value::Kind::table) fail(line, "key '" + path.back() + "' is not a table");
                current = &slot;
            }
            continue;
        }

        const int line = cur.line;
        const std::vector<std::string> path = parse_key_path(cur);
        cur.skip_ws(false);
        if (cur.done() || cur.take() != '=') fail(line, "expected '=' after key");
        Value v = parse_value(cur);
        expect_line_end(cur);

        Value* parent = path.size() > 1 ? descend_tables(current, {path.begin(), path.end() - 1}, line) : current;
        auto [it, inserted] = parent->table.emplace(path.back(), std::move(v));
        if (!inserted) fail(line, "duplicate key '" + path.back() + "'");
    }
    return root;
}

Value parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("toml: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

const Value* find(const Value& root, const std::string& dotted_path) {
    const Value* node = &root;
    std::size_t start = 0;
    while (start <= dotted_path.size()) {
        const std::size_t dot = dotted_path.find('.', start);
        const std::string key = dotted_path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!node->is_table()) return nullptr;
        const auto it = node->table.find(key);
        if (it == node->table.end()) return nullptr;
        node = &it->second;
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    return node;
}

}  // namespace vch::toml
