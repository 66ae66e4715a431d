//! Doc-tested guide chapters (kept in sync with the rendered book).
