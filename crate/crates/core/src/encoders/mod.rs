//! Unimodal encoders: tweet text preprocessing and vocabulary, the LSTM text
//! encoder, image preprocessing, and the CNN vision backbone.

mod image;
mod lstm;
mod text;
mod vision;

pub use image::{crop, load_image, preprocess_image, resize_bilinear, save_png, ImageGeometry};
pub use lstm::{
    encode_text, encode_text_batch, init_lstm, lstm_classifier_logits, TextEncoderConfig,
    EMBEDDING_INIT_RANGE,
};
pub use text::{
    apply_embeddings, parse_embeddings, preprocess_tweet_text, Vocabulary, HASHTAG, NUMBER, PAD,
    SPECIAL_TOKENS, UNK, URL, USER,
};
pub use vision::{init_backbone, vision_features, Stage, VisionBackboneConfig, VisionFeatures};
