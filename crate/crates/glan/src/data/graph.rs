//! Bipartite tweet–user interaction graph.

use std::collections::HashMap;
use std::io::{self, Write};

use super::corpus::Cascade;

/// Undirected bipartite graph linking each source tweet to every user who
/// posted or reposted in its cascade. Edge weight counts interactions, so a
/// user appearing twice in one cascade contributes weight 2.
#[derive(Clone, Debug, PartialEq)]
pub struct HeteroGraph {
    tweet_ids: Vec<String>,
    user_ids: Vec<String>,
    user_index: HashMap<String, usize>,
    /// Per tweet: `(user index, weight)` sorted by user index.
    tweet_users: Vec<Vec<(usize, u32)>>,
    /// Per user: `(tweet index, weight)` sorted by tweet index.
    user_tweets: Vec<Vec<(usize, u32)>>,
}

impl HeteroGraph {
    /// Build from cascades in iteration order; tweet node `i` is the source
    /// of the `i`-th cascade. Users are numbered by first appearance while
    /// scanning each cascade's source author then repost authors.
    pub fn build<'a, I>(cascades: I) -> HeteroGraph
    where
        I: IntoIterator<Item = &'a Cascade>,
    {
        let mut tweet_ids = Vec::new();
        let mut user_ids: Vec<String> = Vec::new();
        let mut user_index: HashMap<String, usize> = HashMap::new();
        let mut tweet_users: Vec<Vec<(usize, u32)>> = Vec::new();

        for cascade in cascades {
            let tweet = tweet_ids.len();
            tweet_ids.push(cascade.source.id.clone());
            let mut counts: HashMap<usize, u32> = HashMap::new();
            for author in cascade.participants() {
                let user = *user_index.entry(author.to_string()).or_insert_with(|| {
                    user_ids.push(author.to_string());
                    user_ids.len() - 1
                });
                *counts.entry(user).or_insert(0) += 1;
            }
            let mut edges: Vec<(usize, u32)> = counts.into_iter().collect();
            edges.sort_unstable_by_key(|&(user, _)| user);
            debug_assert_eq!(tweet_users.len(), tweet);
            tweet_users.push(edges);
        }

        let mut user_tweets: Vec<Vec<(usize, u32)>> = vec![Vec::new(); user_ids.len()];
        for (tweet, edges) in tweet_users.iter().enumerate() {
            for &(user, weight) in edges {
                user_tweets[user].push((tweet, weight));
            }
        }
        // Tweet indices are visited in ascending order above, so each user
        // list is already sorted.
        HeteroGraph {
            tweet_ids,
            user_ids,
            user_index,
            tweet_users,
            user_tweets,
        }
    }

    pub fn n_tweets(&self) -> usize {
        self.tweet_ids.len()
    }

    pub fn n_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn tweet_id(&self, tweet: usize) -> &str {
        &self.tweet_ids[tweet]
    }

    pub fn user_id(&self, user: usize) -> &str {
        &self.user_ids[user]
    }

    pub fn user_ids(&self) -> &[String] {
        &self.user_ids
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.user_index.get(id).copied()
    }

    /// Users interacting with tweet `tweet`, as `(user index, weight)`
    /// sorted by user index.
    pub fn users_of(&self, tweet: usize) -> &[(usize, u32)] {
        &self.tweet_users[tweet]
    }

    /// Tweets user `user` interacted with, as `(tweet index, weight)` sorted
    /// by tweet index.
    pub fn tweets_of(&self, user: usize) -> &[(usize, u32)] {
        &self.user_tweets[user]
    }

    /// Total edge endpoints weighted by interaction count.
    pub fn total_weight(&self) -> u64 {
        self.tweet_users
            .iter()
            .flatten()
            .map(|&(_, w)| u64::from(w))
            .sum()
    }

    /// Write one `user_id tweet_id weight` line per edge, ordered by tweet
    /// then user index.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (tweet, edges) in self.tweet_users.iter().enumerate() {
            for &(user, weight) in edges {
                writeln!(
                    out,
                    "{} {} {}",
                    self.user_ids[user], self.tweet_ids[tweet], weight
                )?;
            }
        }
        Ok(())
    }
}
