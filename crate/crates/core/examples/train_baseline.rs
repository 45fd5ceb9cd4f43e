//! Cross-entropy search on the single-agent task with a small budget.

use dojo::env::TaskConfig;
use dojo::harness::{search_agent_train, SearchConfig};

fn main() {
    let res =
        search_agent_train(&TaskConfig::destroy_uke(), &SearchConfig::default(), 256, 0).unwrap();
    print!("{}", res.curve_table());
    println!("best single-episode return: {:.3}", res.best_return);
    println!("{}", res.agent.to_text().unwrap().lines().next().unwrap());
}
