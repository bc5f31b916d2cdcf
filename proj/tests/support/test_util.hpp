#ifndef UST_TESTS_TEST_UTIL_HPP
#define UST_TESTS_TEST_UTIL_HPP

#include <string>

#include <gtest/gtest.h>

// Passes when `expr` throws `Type` whose message contains `fragment`.
#define EXPECT_THROW_WITH(expr, Type, fragment)                                                   \
    do {                                                                                          \
        try {                                                                                     \
            (void)(expr);                                                                         \
            ADD_FAILURE() << "expected " #Type " from " #expr;                                    \
        } catch (const Type& e_) {                                                                \
            EXPECT_NE(std::string(e_.what()).find(fragment), std::string::npos)                   \
                << "message was: " << e_.what();                                                  \
        }                                                                                         \
    } while (0)

#endif  // UST_TESTS_TEST_UTIL_HPP
