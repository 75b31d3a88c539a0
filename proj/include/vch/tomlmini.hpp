#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vch::toml {

// Config-grade TOML subset: tables, arrays of tables, dotted keys, strings,
// integers, floats, booleans, and (possibly nested, multi-line) arrays.
// Anything outside the subset is rejected loudly with a line number.

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Value {
    enum class Kind { string, integer, floating, boolean, array, table };

    Kind kind = Kind::table;
    std::string str;
    long long int_v = 0;
    double float_v = 0.0;
    bool bool_v = false;
    std::vector<Value> array;
    std::map<std::string, Value> table;

    bool is_table() const { return kind == Kind::table; }
    bool is_array() const { return kind == Kind::array; }
    bool is_number() const { return kind == Kind::integer || kind == Kind::floating; }

    // Typed accessors; throw ParseError naming the offense when misused.
    const std::string& as_string() const;
    long long as_int() const;
    double as_double() const;  // accepts integer values
    bool as_bool() const;
};

Value parse(std::string_view text);
Value parse_file(const std::string& path);

// Dotted-path lookup from a table root; nullptr when any hop is missing.
const Value* find(const Value& root, const std::string& dotted_path);

}  // namespace vch::toml
