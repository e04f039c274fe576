package oneline

func A() {}; func B() int { return 1 }; var _ = 1

func C() { if true { return } }
