package pkg

func Deep() string { return "deep" }
