#include "igen/support.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace igen {

static LogLevel parseLogLevel() {
  const char *Env = getenv("IGEN_LOG");
  if (!Env || !*Env)
    return LogLevel::Error;
  if (!strcmp(Env, "off") || !strcmp(Env, "0"))
    return LogLevel::Off;
  if (!strcmp(Env, "error") || !strcmp(Env, "1"))
    return LogLevel::Error;
  if (!strcmp(Env, "info") || !strcmp(Env, "2"))
    return LogLevel::Info;
  if (!strcmp(Env, "debug") || !strcmp(Env, "3"))
    return LogLevel::Debug;
  return LogLevel::Error;
}

LogLevel logLevel() {
  static LogLevel Level = parseLogLevel();
  return Level;
}

bool logEnabled(LogLevel L) {
  return static_cast<int>(L) <= static_cast<int>(logLevel());
}

void logMessage(LogLevel L, const std::string &Msg) {
  if (!logEnabled(L))
    return;
  static const char *Names[] = {"", "error", "info", "debug"};
  fprintf(stderr, "igen: %s: %s\n", Names[static_cast<int>(L)], Msg.c_str());
}

uint64_t splitmix64(uint64_t X) {
  X += 0x9e3779b97f4a7c15ull;
  X = (X ^ (X >> 30)) * 0xbf58476d1ce4e5b9ull;
  X = (X ^ (X >> 27)) * 0x94d049bb133111ebull;
  return X ^ (X >> 31);
}

} // namespace igen
