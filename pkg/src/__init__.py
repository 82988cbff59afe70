# DagDelay - DAG-BFT latency simulator
