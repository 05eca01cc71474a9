// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace refground
{

/// Base of every error thrown by the library.
class Error: public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (JSON, transcript, answer payload).
class ParseError: public Error
{
public:
    using Error::Error;
};

/// Well-formed input that violates a schema invariant (duplicate ids, bad extents).
class SchemaError: public Error
{
public:
    using Error::Error;
};

/// Argument outside the operation's domain.
class DomainError: public Error
{
public:
    using Error::Error;
};

/// Required task metadata is absent.
class MetadataError: public Error
{
public:
    using Error::Error;
};

/// LLM backend could not be reached or returned an unusable response.
class TransportError: public Error
{
public:
    using Error::Error;
};

} // namespace refground
