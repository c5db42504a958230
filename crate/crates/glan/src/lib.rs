//! Rumor detection on microblog cascades by jointly encoding local
//! source–retweet relations (CNN text features + multi-head attention +
//! a sigmoid fusion gate) and global tweet–user relations (attention over
//! a heterogeneous bipartite graph).

pub mod attention;
pub mod data;
pub mod eval;
pub mod global_encoding;
pub mod local_encoding;
pub mod model;
pub mod numerics;
pub mod text_encoder;
