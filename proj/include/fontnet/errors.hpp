#pragma once

#include <stdexcept>
#include <string>

namespace fontnet {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define FONTNET_ERROR(name)                      \
    struct name : Error {                        \
        using Error::Error;                      \
    }

// dataset
FONTNET_ERROR(MissingGlyph);
FONTNET_ERROR(BadResolution);
FONTNET_ERROR(ParamOutOfRange);
FONTNET_ERROR(InvalidFraction);
FONTNET_ERROR(InsufficientItems);
FONTNET_ERROR(MissingEmbedding);

// networks
FONTNET_ERROR(ShapeMismatch);
FONTNET_ERROR(ChannelMismatch);
FONTNET_ERROR(IndexOutOfRange);
FONTNET_ERROR(EmptyList);
FONTNET_ERROR(DimMismatch);
FONTNET_ERROR(NonFinite);

// trainer
FONTNET_ERROR(NonFiniteLoss);
FONTNET_ERROR(UnknownVariant);

// evaluation
FONTNET_ERROR(TooSmall);
FONTNET_ERROR(NotPSD);
FONTNET_ERROR(InsufficientClasses);
FONTNET_ERROR(InsufficientSamples);
FONTNET_ERROR(LabelOutOfRange);
FONTNET_ERROR(EmptyInput);

// io
FONTNET_ERROR(IOError);

#undef FONTNET_ERROR

}  // namespace fontnet
