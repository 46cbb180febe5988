#include <doctest.h>

#include "vizbridge/mcp_server.hpp"
#include "vizbridge/mock_engine.hpp"

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>
#include <sstream>

using namespace vizbridge;

namespace {

struct ServerFixture {
    MockEngine engine;
    SessionContext session;
    ToolRegistry registry;
    mcp::McpServer server;

    ServerFixture()
        : session(engine, std::filesystem::temp_directory_path() /
                              ("vizbridge-proto-" + std::to_string(::getpid()) + "-" +
                               std::to_string(counter++))),
          registry(session),
          server(registry)
    {
    }

    json roundtrip(const std::string& line)
    {
        const auto response = server.process_line(line);
        REQUIRE(response.has_value());
        return json::parse(*response);
    }

    void initialize()
    {
        const json reply = roundtrip(
            R"({"jsonrpc":"2.0","id":0,"method":"initialize","params":{"protocolVersion":"2024-11-05"}})");
        REQUIRE(reply.contains("result"));
    }

    static int counter;
};

int ServerFixture::counter = 0;

} // namespace

TEST_CASE("decode_message handles the JSON-RPC grammar")
{
    SUBCASE("plain request")
    {
        const auto req = mcp::decode_message(R"({"jsonrpc":"2.0","id":1,"method":"tools/list"})");
        CHECK(req.method == "tools/list");
        CHECK(std::get<std::int64_t>(req.id.value) == 1);
        CHECK(req.params.empty());
    }

    SUBCASE("string id and nested params")
    {
        const auto req = mcp::decode_message(
            R"({"jsonrpc":"2.0","id":"a","method":"tools/call","params":{"name":"get_scalar_range","arguments":{}}})");
        CHECK(std::get<std::string>(req.id.value) == "a");
        CHECK(req.params["name"] == "get_scalar_range");
    }

    SUBCASE("absent or null id means notification")
    {
        CHECK(mcp::decode_message(R"({"jsonrpc":"2.0","method":"notifications/initialized"})")
                  .is_notification());
        CHECK(mcp::decode_message(R"({"jsonrpc":"2.0","id":null,"method":"x"})")
                  .is_notification());
    }

    SUBCASE("malformed JSON is a parse error")
    {
        CHECK_THROWS_AS((void)mcp::decode_message("not-json"), mcp::ProtocolError);
        try {
            (void)mcp::decode_message("not-json");
        } catch (const mcp::ProtocolError& e) {
            CHECK(e.code() == mcp::kParseError);
        }
    }

    SUBCASE("valid JSON without a method is an invalid request")
    {
        try {
            (void)mcp::decode_message(R"({"jsonrpc":"2.0","id":1})");
            FAIL("expected ProtocolError");
        } catch (const mcp::ProtocolError& e) {
            CHECK(e.code() == mcp::kInvalidRequest);
        }
        CHECK_THROWS_AS((void)mcp::decode_message(R"([1,2,3])"), mcp::ProtocolError);
        CHECK_THROWS_AS((void)mcp::decode_message(R"({"jsonrpc":"1.0","id":1,"method":"m"})"),
                        mcp::ProtocolError);
        CHECK_THROWS_AS(
            (void)mcp::decode_message(R"({"jsonrpc":"2.0","id":{},"method":"m"})"),
            mcp::ProtocolError);
    }
}

TEST_CASE("request encoding round-trips through the decoder")
{
    std::mt19937 rng(21);
    std::uniform_int_distribution<int> id_kind(0, 2);
    std::uniform_int_distribution<int> n_params(0, 4);
    std::uniform_int_distribution<std::int64_t> id_num(-1000, 1000);

    const std::vector<std::string> methods = {"initialize", "tools/list", "tools/call", "ping"};
    std::uniform_int_distribution<std::size_t> method_pick(0, methods.size() - 1);

    for (int i = 0; i < 200; ++i) {
        mcp::RpcRequest request;
        request.method = methods[method_pick(rng)];
        switch (id_kind(rng)) {
        case 0: break;  // notification
        case 1: request.id.value = id_num(rng); break;
        default: request.id.value = "id-" + std::to_string(id_num(rng)); break;
        }
        const int params = n_params(rng);
        for (int p = 0; p < params; ++p)
            request.params["k" + std::to_string(p)] = id_num(rng);

        const std::string line = mcp::encode_request(request);
        const mcp::RpcRequest decoded = mcp::decode_message(line);
        CHECK(decoded.method == request.method);
        CHECK(decoded.id == request.id);
        CHECK(decoded.params == request.params);
        // and the re-encoding parses to a structurally equal message
        CHECK(json::parse(mcp::encode_request(decoded)) == json::parse(line));
    }
}

TEST_CASE("initialize handshake")
{
    ServerFixture fx;

    SUBCASE("reports server info and tool capability")
    {
        const json reply = fx.roundtrip(
            R"({"jsonrpc":"2.0","id":7,"method":"initialize","params":{"protocolVersion":"2024-11-05"}})");
        CHECK(reply["id"] == 7);
        CHECK(reply["result"]["serverInfo"]["name"] == "vizbridge-mcp");
        CHECK(reply["result"]["protocolVersion"] == mcp::McpServer::kProtocolVersion);
        CHECK(reply["result"]["capabilities"].contains("tools"));
    }

    SUBCASE("tools/call before initialize is rejected")
    {
        const json reply = fx.roundtrip(
            R"({"jsonrpc":"2.0","id":1,"method":"tools/call","params":{"name":"list_sources"}})");
        REQUIRE(reply.contains("error"));
        CHECK(reply["error"]["message"].get<std::string>().find("not initialized") !=
              std::string::npos);
    }

    SUBCASE("re-initialization is an error")
    {
        fx.initialize();
        const json reply = fx.roundtrip(
            R"({"jsonrpc":"2.0","id":9,"method":"initialize","params":{"protocolVersion":"2024-11-05"}})");
        REQUIRE(reply.contains("error"));
        CHECK(reply["error"]["message"].get<std::string>().find("already initialized") !=
              std::string::npos);
    }

    SUBCASE("other protocol versions are rejected")
    {
        const json reply = fx.roundtrip(
            R"({"jsonrpc":"2.0","id":1,"method":"initialize","params":{"protocolVersion":"1999-01-01"}})");
        REQUIRE(reply.contains("error"));
        CHECK(reply["error"]["message"].get<std::string>().find("2024-11-05") !=
              std::string::npos);
    }

    SUBCASE("initialize then tools/call succeeds")
    {
        fx.initialize();
        const json reply = fx.roundtrip(
            R"({"jsonrpc":"2.0","id":2,"method":"tools/call","params":{"name":"list_sources","arguments":{}}})");
        REQUIRE(reply.contains("result"));
        CHECK(reply["result"]["isError"] == false);
    }
}

TEST_CASE("tools/list mirrors the registry")
{
    ServerFixture fx;
    fx.initialize();

    const json reply = fx.roundtrip(R"({"jsonrpc":"2.0","id":1,"method":"tools/list"})");
    const json& tools = reply["result"]["tools"];
    CHECK(tools.size() == fx.registry.descriptors().size());
    CHECK(tools.size() >= 14);

    for (const auto& tool : tools) {
        CHECK(!tool["name"].get<std::string>().empty());
        CHECK(!tool["description"].get<std::string>().empty());
        CHECK(tool["inputSchema"]["type"] == "object");
    }

    // create_isosurface documents its numeric value parameter with range metadata
    const auto iso = std::find_if(tools.begin(), tools.end(), [](const json& t) {
        return t["name"] == "create_isosurface";
    });
    REQUIRE(iso != tools.end());
    const json& value_schema = (*iso)["inputSchema"]["properties"]["value"];
    CHECK(value_schema["type"] == "number");
    CHECK(value_schema["constraint"].get<std::string>().find("range") != std::string::npos);
}

TEST_CASE("tools/call dispatch keeps failures in-band")
{
    ServerFixture fx;
    fx.initialize();

    SUBCASE("empty pipeline listing")
    {
        const json reply = fx.roundtrip(
            R"({"jsonrpc":"2.0","id":1,"method":"tools/call","params":{"name":"list_sources","arguments":{}}})");
        CHECK(reply["result"]["isError"] == false);
        CHECK(reply["result"]["content"][0]["text"].get<std::string>().find(
                  "no sources loaded") != std::string::npos);
    }

    SUBCASE("unknown tool")
    {
        const json reply = fx.roundtrip(
            R"({"jsonrpc":"2.0","id":1,"method":"tools/call","params":{"name":"no_such_tool","arguments":{}}})");
        CHECK(reply["result"]["isError"] == true);
        CHECK(reply["result"]["content"][0]["text"].get<std::string>().find("unknown tool") !=
              std::string::npos);
    }

    SUBCASE("schema violation names the parameter")
    {
        const json reply = fx.roundtrip(
            R"({"jsonrpc":"2.0","id":1,"method":"tools/call","params":{"name":"create_isosurface","arguments":{"value":"abc"}}})");
        CHECK(reply["result"]["isError"] == true);
        CHECK(reply["result"]["content"][0]["text"].get<std::string>().find("value") !=
              std::string::npos);
    }

    SUBCASE("missing tool name is in-band too")
    {
        const json reply = fx.roundtrip(
            R"({"jsonrpc":"2.0","id":1,"method":"tools/call","params":{}})");
        REQUIRE(reply.contains("result"));
        CHECK(reply["result"]["isError"] == true);
    }

    SUBCASE("unknown method is a protocol error")
    {
        const json reply =
            fx.roundtrip(R"({"jsonrpc":"2.0","id":1,"method":"does/not/exist"})");
        REQUIRE(reply.contains("error"));
        CHECK(reply["error"]["code"] == mcp::kMethodNotFound);
    }
}

TEST_CASE("serve loop: ordering, isolation, clean EOF")
{
    ServerFixture fx;

    SUBCASE("responses arrive in request order with matching ids")
    {
        std::istringstream in(
            R"({"jsonrpc":"2.0","id":1,"method":"initialize","params":{"protocolVersion":"2024-11-05"}})"
            "\n"
            R"({"jsonrpc":"2.0","id":2,"method":"tools/list"})"
            "\n");
        std::ostringstream out;
        fx.server.run_serve_loop(in, out);

        std::istringstream lines(out.str());
        std::string line;
        REQUIRE(std::getline(lines, line));
        CHECK(json::parse(line)["id"] == 1);
        REQUIRE(std::getline(lines, line));
        CHECK(json::parse(line)["id"] == 2);
        CHECK(!std::getline(lines, line));
    }

    SUBCASE("a malformed line between valid ones does not break them")
    {
        std::istringstream in(
            R"({"jsonrpc":"2.0","id":1,"method":"initialize","params":{"protocolVersion":"2024-11-05"}})"
            "\n"
            "%%%garbage%%%\n"
            R"({"jsonrpc":"2.0","id":2,"method":"tools/list"})"
            "\n");
        std::ostringstream out;
        fx.server.run_serve_loop(in, out);

        std::istringstream lines(out.str());
        std::string line;
        REQUIRE(std::getline(lines, line));
        CHECK(json::parse(line)["id"] == 1);
        REQUIRE(std::getline(lines, line));
        CHECK(json::parse(line)["error"]["code"] == mcp::kParseError);
        REQUIRE(std::getline(lines, line));
        CHECK(json::parse(line)["result"].contains("tools"));
    }

    SUBCASE("empty input exits immediately with no output")
    {
        std::istringstream in("");
        std::ostringstream out;
        fx.server.run_serve_loop(in, out);
        CHECK(out.str().empty());
    }

    SUBCASE("notifications produce no response")
    {
        std::istringstream in(R"({"jsonrpc":"2.0","method":"notifications/initialized"})" "\n");
        std::ostringstream out;
        fx.server.run_serve_loop(in, out);
        CHECK(out.str().empty());
    }
}

TEST_CASE("response-id multiset equals the non-notification request-id multiset")
{
    ServerFixture fx;

    std::mt19937 rng(5);
    std::uniform_int_distribution<int> kind(0, 5);
    std::ostringstream script;
    std::multiset<std::string> sent_ids;

    script << R"({"jsonrpc":"2.0","id":0,"method":"initialize","params":{"protocolVersion":"2024-11-05"}})"
           << "\n";
    sent_ids.insert("0");

    for (int i = 1; i <= 60; ++i) {
        switch (kind(rng)) {
        case 0:
            script << R"({"jsonrpc":"2.0","method":"notifications/initialized"})" << "\n";
            break;
        case 1:
            script << "]][[broken\n";  // malformed: answered with id null
            sent_ids.insert("null");
            break;
        default:
            script << R"({"jsonrpc":"2.0","id":)" << i
                   << R"(,"method":"tools/call","params":{"name":"list_sources","arguments":{}}})"
                   << "\n";
            sent_ids.insert(std::to_string(i));
            break;
        }
    }

    std::istringstream in(script.str());
    std::ostringstream out;
    fx.server.run_serve_loop(in, out);

    std::multiset<std::string> got_ids;
    std::istringstream lines(out.str());
    std::string line;
    while (std::getline(lines, line))
        got_ids.insert(json::parse(line)["id"].dump());
    CHECK(got_ids == sent_ids);
}

TEST_CASE("crash isolation: no input line terminates the loop before EOF")
{
    ServerFixture fx;

    std::mt19937 rng(17);
    std::uniform_int_distribution<int> len(0, 200);
    std::uniform_int_distribution<int> byte(1, 255);  // no NUL: getline frames on it anyway

    std::string script;
    int expected_responses = 0;
    for (int i = 0; i < 300; ++i) {
        const int n = len(rng);
        std::string line;
        for (int k = 0; k < n; ++k) {
            char c = static_cast<char>(byte(rng));
            if (c == '\n')
                c = ' ';
            line.push_back(c);
        }
        if (line.find_first_not_of(" \t\r") != std::string::npos)
            ++expected_responses;
        script += line;
        script += "\n";
    }
    script += R"({"jsonrpc":"2.0","id":999,"method":"ping"})" "\n";
    ++expected_responses;

    std::istringstream in(script);
    std::ostringstream out;
    fx.server.run_serve_loop(in, out);

    int responses = 0;
    std::string line;
    std::istringstream lines(out.str());
    json last;
    while (std::getline(lines, line)) {
        ++responses;
        last = json::parse(line);  // every stdout line parses as JSON-RPC
        CHECK(last.contains("jsonrpc"));
    }
    CHECK(responses == expected_responses);
    CHECK(last["id"] == 999);  // the loop survived to the final request
}

TEST_CASE("every tool result serializes with a nonempty content list")
{
    ServerFixture fx;
    fx.initialize();

    const std::vector<std::string> calls = {
        R"({"jsonrpc":"2.0","id":1,"method":"tools/call","params":{"name":"list_sources","arguments":{}}})",
        R"({"jsonrpc":"2.0","id":2,"method":"tools/call","params":{"name":"no_such_tool","arguments":{}}})",
        R"({"jsonrpc":"2.0","id":3,"method":"tools/call","params":{"name":"get_surface_area","arguments":{}}})",
        R"({"jsonrpc":"2.0","id":4,"method":"tools/call","params":{"name":"reset_camera","arguments":{}}})",
    };
    for (const auto& call : calls) {
        const json reply = fx.roundtrip(call);
        REQUIRE(reply.contains("result"));
        CHECK(!reply["result"]["content"].empty());
    }
}
